#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "facetok/kernels.hpp"
#include "facetok/tensor.hpp"

namespace facetok {

// linear warmup over warmup_frac * total, then cosine decay to zero
inline double lr_at_step(double peak, int step, int total_steps, double warmup_frac) {
  const int warmup = std::max(1, int(std::ceil(warmup_frac * total_steps)));
  if (step < warmup) return peak * double(step + 1) / double(warmup);
  if (total_steps <= warmup) return peak;
  const double progress = double(step - warmup) / double(total_steps - warmup);
  return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

template <typename T>
double global_grad_norm(const std::vector<Parameter<T>*>& params) {
  double sum = 0;
  for (const auto* p : params)
    for (T g : p->grad.data) sum += double(g) * double(g);
  return std::sqrt(sum);
}

template <typename T>
void clip_grad_norm(std::vector<Parameter<T>*>& params, double max_norm) {
  if (max_norm <= 0) return;
  const double total = global_grad_norm(params);
  if (total <= max_norm) return;
  const T factor = T(max_norm / total);
  for (auto* p : params)
    for (T& g : p->grad.data) g *= factor;
}

// Orthogonalize via the quintic Newton-Schulz iteration; operates in place.
// The result has singular values near 1 for any full-rank input.
template <typename T>
void newton_schulz_orthogonalize(Tensor<T>& x, int iterations = 5, double eps = 1e-7) {
  const T a = T(3.4445), b = T(-4.7750), c = T(2.0315);
  int rows = x.rows(), cols = x.cols();
  double fnorm = 0;
  for (T v : x.data) fnorm += double(v) * double(v);
  fnorm = std::sqrt(fnorm) + eps;
  for (T& v : x.data) v = T(double(v) / fnorm);

  const bool transposed = rows > cols;
  Tensor<T> work = x;
  if (transposed) {
    work = Tensor<T>({cols, rows});
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) work.data[size_t(j) * rows + i] = x.data[size_t(i) * cols + j];
    std::swap(rows, cols);
  }

  Tensor<T> gram({rows, rows}), gram2({rows, rows}), update({rows, cols});
  for (int it = 0; it < iterations; ++it) {
    mm_nt(work.data.data(), work.data.data(), gram.data.data(), rows, cols, rows);
    mm_nn(gram.data.data(), gram.data.data(), gram2.data.data(), rows, rows, rows);
    for (int64_t i = 0; i < gram.size(); ++i)
      gram.data[size_t(i)] = b * gram.data[size_t(i)] + c * gram2.data[size_t(i)];
    mm_nn(gram.data.data(), work.data.data(), update.data.data(), rows, rows, cols);
    for (int64_t i = 0; i < work.size(); ++i)
      work.data[size_t(i)] = a * work.data[size_t(i)] + update.data[size_t(i)];
  }

  if (transposed) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) x.data[size_t(j) * rows + i] = work.data[size_t(i) * cols + j];
  } else {
    x = std::move(work);
  }
}

template <typename T>
class AdamW {
 public:
  explicit AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Parameter<T>*>& params, double lr, double weight_decay) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    for (auto* p : params) {
      State& s = state_for(*p);
      for (int64_t i = 0; i < p->value.size(); ++i) {
        const double g = double(p->grad.data[size_t(i)]);
        double m = double(s.m.data[size_t(i)]) * beta1_ + (1.0 - beta1_) * g;
        double v = double(s.v.data[size_t(i)]) * beta2_ + (1.0 - beta2_) * g * g;
        s.m.data[size_t(i)] = T(m);
        s.v.data[size_t(i)] = T(v);
        const double update = (m / bc1) / (std::sqrt(v / bc2) + eps_);
        double w = double(p->value.data[size_t(i)]);
        w -= lr * (update + weight_decay * w);
        p->value.data[size_t(i)] = T(w);
      }
    }
  }

  int step_count() const { return step_count_; }
  void set_step_count(int n) { step_count_ = n; }

  // serialized as "<param>.adam_m" / "<param>.adam_v"
  std::vector<std::pair<std::string, Tensor<T>*>> state_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (auto& [name, s] : state_) {
      out.push_back({name + ".adam_m", &s.m});
      out.push_back({name + ".adam_v", &s.v});
    }
    return out;
  }

  Tensor<T>* find_state(const std::string& key) {
    for (auto& [name, s] : state_) {
      if (key == name + ".adam_m") return &s.m;
      if (key == name + ".adam_v") return &s.v;
    }
    return nullptr;
  }

 private:
  struct State {
    Tensor<T> m, v;
  };

  State& state_for(Parameter<T>& p) {
    auto it = state_.find(p.name);
    if (it == state_.end()) {
      State s{Tensor<T>::zeros(p.value.shape), Tensor<T>::zeros(p.value.shape)};
      it = state_.emplace(p.name, std::move(s)).first;
    }
    return it->second;
  }

  double beta1_, beta2_, eps_;
  int step_count_ = 0;
  std::map<std::string, State> state_;
};

// Momentum + Newton-Schulz orthogonalization for matrix parameters;
// everything else (vectors, scalars) falls back to AdamW.
template <typename T>
class Muon {
 public:
  explicit Muon(double momentum = 0.95) : momentum_(momentum) {}

  void step(std::vector<Parameter<T>*>& params, double lr, double weight_decay) {
    std::vector<Parameter<T>*> fallback;
    for (auto* p : params) {
      if (p->value.rank() != 2 || p->value.rows() < 2 || p->value.cols() < 2) {
        fallback.push_back(p);
        continue;
      }
      Tensor<T>& buf = buffer_for(*p);
      for (int64_t i = 0; i < buf.size(); ++i)
        buf.data[size_t(i)] = T(momentum_ * double(buf.data[size_t(i)]) +
                                double(p->grad.data[size_t(i)]));
      Tensor<T> update = buf;
      newton_schulz_orthogonalize(update);
      const double rows = p->value.rows(), cols = p->value.cols();
      const double shape_scale = std::sqrt(std::max(1.0, rows / cols));
      for (int64_t i = 0; i < update.size(); ++i) {
        double w = double(p->value.data[size_t(i)]);
        w -= lr * (shape_scale * double(update.data[size_t(i)]) + weight_decay * w);
        p->value.data[size_t(i)] = T(w);
      }
    }
    if (!fallback.empty()) adamw_.step(fallback, lr, weight_decay);
  }

  AdamW<T>& fallback() { return adamw_; }

 private:
  Tensor<T>& buffer_for(Parameter<T>& p) {
    auto it = buffers_.find(p.name);
    if (it == buffers_.end())
      it = buffers_.emplace(p.name, Tensor<T>::zeros(p.value.shape)).first;
    return it->second;
  }

  double momentum_;
  AdamW<T> adamw_;
  std::map<std::string, Tensor<T>> buffers_;
};

}  // namespace facetok
