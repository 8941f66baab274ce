#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "facetok/kernels.hpp"
#include "facetok/tape.hpp"

// Differentiable ops over tape nodes. Shapes are checked eagerly; every
// backward accumulates additively into the input gradients.

namespace facetok {

namespace detail {

template <typename T>
int binary_elementwise_check(Tape<T>& t, int a, int b, const char* what) {
  if (!t.val(a).same_shape(t.val(b)))
    throw numeric_error(std::string(what) + ": shape mismatch " + t.val(a).shape_str() +
                        " vs " + t.val(b).shape_str());
  return 0;
}

}  // namespace detail

template <typename T>
int add(Tape<T>& t, int a, int b) {
  detail::binary_elementwise_check(t, a, b, "add");
  Tensor<T> out = t.val(a);
  const Tensor<T>& bv = t.val(b);
  for (int64_t i = 0; i < out.size(); ++i) out.data[size_t(i)] += bv.data[size_t(i)];
  const int y = t.make_node(std::move(out), t.needs_grad(a) || t.needs_grad(b));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, a, b, y] {
      const Tensor<T>& g = t.grad(y);
      for (int n : {a, b}) {
        if (!t.needs_grad(n)) continue;
        Tensor<T>& gn = t.grad(n);
        for (int64_t i = 0; i < g.size(); ++i) gn.data[size_t(i)] += g.data[size_t(i)];
      }
    });
  return y;
}

// x [M,N] + row vector r ([N] or [1,N])
template <typename T>
int add_rowvec(Tape<T>& t, int x, int r) {
  const Tensor<T>& xv = t.val(x);
  const Tensor<T>& rv = t.val(r);
  const int m = xv.rows(), n = xv.cols();
  if (int64_t(n) != rv.size())
    throw numeric_error("add_rowvec: width mismatch " + xv.shape_str() + " vs " +
                        rv.shape_str());
  Tensor<T> out = xv;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[size_t(i) * n + j] += rv.data[size_t(j)];
  const int y = t.make_node(std::move(out), t.needs_grad(x) || t.needs_grad(r));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, r, y, m, n] {
      const Tensor<T>& g = t.grad(y);
      if (t.needs_grad(x)) {
        Tensor<T>& gx = t.grad(x);
        for (int64_t i = 0; i < g.size(); ++i) gx.data[size_t(i)] += g.data[size_t(i)];
      }
      if (t.needs_grad(r)) {
        Tensor<T>& gr = t.grad(r);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) gr.data[size_t(j)] += g.data[size_t(i) * n + j];
      }
    });
  return y;
}

template <typename T>
int mul(Tape<T>& t, int a, int b) {
  detail::binary_elementwise_check(t, a, b, "mul");
  Tensor<T> out = t.val(a);
  const Tensor<T>& bv = t.val(b);
  for (int64_t i = 0; i < out.size(); ++i) out.data[size_t(i)] *= bv.data[size_t(i)];
  const int y = t.make_node(std::move(out), t.needs_grad(a) || t.needs_grad(b));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, a, b, y] {
      const Tensor<T>& g = t.grad(y);
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.grad(a);
        const Tensor<T>& bv2 = t.val(b);
        for (int64_t i = 0; i < g.size(); ++i)
          ga.data[size_t(i)] += g.data[size_t(i)] * bv2.data[size_t(i)];
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad(b);
        const Tensor<T>& av = t.val(a);
        for (int64_t i = 0; i < g.size(); ++i)
          gb.data[size_t(i)] += g.data[size_t(i)] * av.data[size_t(i)];
      }
    });
  return y;
}

template <typename T>
int scale(Tape<T>& t, int a, T s) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v *= s;
  const int y = t.make_node(std::move(out), t.needs_grad(a));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, a, y, s] {
      const Tensor<T>& g = t.grad(y);
      Tensor<T>& ga = t.grad(a);
      for (int64_t i = 0; i < g.size(); ++i) ga.data[size_t(i)] += s * g.data[size_t(i)];
    });
  return y;
}

template <typename T>
int matmul(Tape<T>& t, int a, int b) {
  const Tensor<T>& av = t.val(a);
  const Tensor<T>& bv = t.val(b);
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k)
    throw numeric_error("matmul: inner dims " + av.shape_str() + " x " + bv.shape_str());
  Tensor<T> out({m, n});
  mm_nn(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
  const int y = t.make_node(std::move(out), t.needs_grad(a) || t.needs_grad(b));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, a, b, y, m, k, n] {
      const Tensor<T>& g = t.grad(y);
      if (t.needs_grad(a))
        mm_nt_acc(g.data.data(), t.val(b).data.data(), t.grad(a).data.data(), m, n, k);
      if (t.needs_grad(b))
        mm_tn_acc(t.val(a).data.data(), g.data.data(), t.grad(b).data.data(), m, k, n);
    });
  return y;
}

// a [M,K] x b [N,K]^T -> [M,N]
template <typename T>
int matmul_nt(Tape<T>& t, int a, int b) {
  const Tensor<T>& av = t.val(a);
  const Tensor<T>& bv = t.val(b);
  const int m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k)
    throw numeric_error("matmul_nt: inner dims " + av.shape_str() + " x " + bv.shape_str());
  Tensor<T> out({m, n});
  mm_nt(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
  const int y = t.make_node(std::move(out), t.needs_grad(a) || t.needs_grad(b));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, a, b, y, m, k, n] {
      const Tensor<T>& g = t.grad(y);
      if (t.needs_grad(a))
        mm_nn_acc(g.data.data(), t.val(b).data.data(), t.grad(a).data.data(), m, n, k);
      if (t.needs_grad(b))
        mm_tn_acc(g.data.data(), t.val(a).data.data(), t.grad(b).data.data(), m, n, k);
    });
  return y;
}

// x [M,in] * w [in,out] + b [out]; pass b = -1 to skip the bias
template <typename T>
int linear(Tape<T>& t, int x, int w, int b) {
  const Tensor<T>& xv = t.val(x);
  const Tensor<T>& wv = t.val(w);
  const int m = xv.rows(), in = xv.cols(), out_dim = wv.cols();
  if (wv.rows() != in)
    throw numeric_error("linear: " + xv.shape_str() + " x " + wv.shape_str());
  Tensor<T> out({m, out_dim});
  mm_nn(xv.data.data(), wv.data.data(), out.data.data(), m, in, out_dim);
  if (b >= 0) {
    const Tensor<T>& bv = t.val(b);
    if (bv.size() != out_dim) throw numeric_error("linear: bias width mismatch");
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < out_dim; ++j)
        out.data[size_t(i) * out_dim + j] += bv.data[size_t(j)];
  }
  const bool tracked = t.needs_grad(x) || t.needs_grad(w) || (b >= 0 && t.needs_grad(b));
  const int y = t.make_node(std::move(out), tracked);
  if (t.recording() && tracked)
    t.push_op([&t, x, w, b, y, m, in, out_dim] {
      const Tensor<T>& g = t.grad(y);
      if (t.needs_grad(x))
        mm_nt_acc(g.data.data(), t.val(w).data.data(), t.grad(x).data.data(), m, out_dim, in);
      if (t.needs_grad(w))
        mm_tn_acc(t.val(x).data.data(), g.data.data(), t.grad(w).data.data(), m, in, out_dim);
      if (b >= 0 && t.needs_grad(b)) {
        Tensor<T>& gb = t.grad(b);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < out_dim; ++j)
            gb.data[size_t(j)] += g.data[size_t(i) * out_dim + j];
      }
    });
  return y;
}

template <typename T>
int embedding(Tape<T>& t, int table, std::vector<int> ids) {
  const Tensor<T>& tv = t.val(table);
  const int vocab = tv.rows(), d = tv.cols();
  for (int id : ids)
    if (id < 0 || id >= vocab) throw data_error("embedding id out of range");
  Tensor<T> out({int(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tv.data.data() + size_t(ids[i]) * d, d, out.data.data() + i * d);
  const int y = t.make_node(std::move(out), t.needs_grad(table));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, table, y, d, ids = std::move(ids)] {
      const Tensor<T>& g = t.grad(y);
      Tensor<T>& gt = t.grad(table);
      for (size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j)
          gt.data[size_t(ids[i]) * d + j] += g.data[i * size_t(d) + j];
    });
  return y;
}

// rows gathered from a node (queries from embedded points)
template <typename T>
int gather_rows(Tape<T>& t, int x, std::vector<int> rows) {
  const Tensor<T>& xv = t.val(x);
  const int d = xv.cols();
  for (int r : rows)
    if (r < 0 || r >= xv.rows()) throw numeric_error("gather_rows: index out of range");
  Tensor<T> out({int(rows.size()), d});
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy_n(xv.data.data() + size_t(rows[i]) * d, d, out.data.data() + i * d);
  const int y = t.make_node(std::move(out), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y, d, rows = std::move(rows)] {
      const Tensor<T>& g = t.grad(y);
      Tensor<T>& gx = t.grad(x);
      for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < d; ++j)
          gx.data[size_t(rows[i]) * d + j] += g.data[i * size_t(d) + j];
    });
  return y;
}

template <typename T>
int slice_rows(Tape<T>& t, int x, int r0, int r1) {
  const Tensor<T>& xv = t.val(x);
  const int d = xv.cols();
  if (r0 < 0 || r1 < r0 || r1 > xv.rows()) throw numeric_error("slice_rows: bad range");
  Tensor<T> out({r1 - r0, d});
  std::copy_n(xv.data.data() + size_t(r0) * d, size_t(r1 - r0) * d, out.data.data());
  const int y = t.make_node(std::move(out), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y, r0, r1, d] {
      const Tensor<T>& g = t.grad(y);
      Tensor<T>& gx = t.grad(x);
      for (int64_t i = 0; i < int64_t(r1 - r0) * d; ++i)
        gx.data[size_t(r0) * d + size_t(i)] += g.data[size_t(i)];
    });
  return y;
}

template <typename T>
int slice_cols(Tape<T>& t, int x, int c0, int c1) {
  const Tensor<T>& xv = t.val(x);
  const int m = xv.rows(), n = xv.cols();
  if (c0 < 0 || c1 < c0 || c1 > n) throw numeric_error("slice_cols: bad range");
  const int w = c1 - c0;
  Tensor<T> out({m, w});
  for (int i = 0; i < m; ++i)
    std::copy_n(xv.data.data() + size_t(i) * n + c0, w, out.data.data() + size_t(i) * w);
  const int y = t.make_node(std::move(out), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y, c0, m, n, w] {
      const Tensor<T>& g = t.grad(y);
      Tensor<T>& gx = t.grad(x);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
          gx.data[size_t(i) * n + c0 + j] += g.data[size_t(i) * w + j];
    });
  return y;
}

template <typename T>
int concat_cols(Tape<T>& t, int a, int b) {
  const Tensor<T>& av = t.val(a);
  const Tensor<T>& bv = t.val(b);
  if (av.rows() != bv.rows()) throw numeric_error("concat_cols: row mismatch");
  const int m = av.rows(), na = av.cols(), nb = bv.cols();
  Tensor<T> out({m, na + nb});
  for (int i = 0; i < m; ++i) {
    std::copy_n(av.data.data() + size_t(i) * na, na, out.data.data() + size_t(i) * (na + nb));
    std::copy_n(bv.data.data() + size_t(i) * nb, nb,
                out.data.data() + size_t(i) * (na + nb) + na);
  }
  const int y = t.make_node(std::move(out), t.needs_grad(a) || t.needs_grad(b));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, a, b, y, m, na, nb] {
      const Tensor<T>& g = t.grad(y);
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.grad(a);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < na; ++j)
            ga.data[size_t(i) * na + j] += g.data[size_t(i) * (na + nb) + j];
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad(b);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < nb; ++j)
            gb.data[size_t(i) * nb + j] += g.data[size_t(i) * (na + nb) + na + j];
      }
    });
  return y;
}

template <typename T>
int concat_rows(Tape<T>& t, const std::vector<int>& parts) {
  if (parts.empty()) throw numeric_error("concat_rows: no parts");
  const int d = t.val(parts[0]).cols();
  int total = 0;
  bool tracked = false;
  for (int p : parts) {
    if (t.val(p).cols() != d) throw numeric_error("concat_rows: column mismatch");
    total += t.val(p).rows();
    tracked = tracked || t.needs_grad(p);
  }
  Tensor<T> out({total, d});
  int row = 0;
  for (int p : parts) {
    const Tensor<T>& pv = t.val(p);
    std::copy_n(pv.data.data(), pv.size(), out.data.data() + size_t(row) * d);
    row += pv.rows();
  }
  const int y = t.make_node(std::move(out), tracked);
  if (t.recording() && tracked)
    t.push_op([&t, y, d, parts] {
      const Tensor<T>& g = t.grad(y);
      int r = 0;
      for (int p : parts) {
        const int rows = t.val(p).rows();
        if (t.needs_grad(p)) {
          Tensor<T>& gp = t.grad(p);
          for (int64_t i = 0; i < int64_t(rows) * d; ++i)
            gp.data[size_t(i)] += g.data[size_t(r) * d + size_t(i)];
        }
        r += rows;
      }
    });
  return y;
}

// row-major relabel, data order unchanged
template <typename T>
int reshape(Tape<T>& t, int x, std::vector<int> shape) {
  if (Tensor<T>::count(shape) != t.val(x).size())
    throw numeric_error("reshape: element count mismatch");
  Tensor<T> out = t.val(x);
  out.shape = shape;
  const int y = t.make_node(std::move(out), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y] {
      const Tensor<T>& g = t.grad(y);
      Tensor<T>& gx = t.grad(x);
      for (int64_t i = 0; i < g.size(); ++i) gx.data[size_t(i)] += g.data[size_t(i)];
    });
  return y;
}

template <typename T>
int layer_norm(Tape<T>& t, int x, int gamma, int beta, T eps = T(1e-5)) {
  const Tensor<T>& xv = t.val(x);
  const int m = xv.rows(), n = xv.cols();
  if (t.val(gamma).size() != n || t.val(beta).size() != n)
    throw numeric_error("layer_norm: affine width mismatch");
  Tensor<T> out({m, n});
  auto stats = std::make_shared<std::vector<T>>(size_t(m) * 2);  // mean, rstd per row
  const Tensor<T>& gv = t.val(gamma);
  const Tensor<T>& bv = t.val(beta);
  for (int i = 0; i < m; ++i) {
    const T* row = xv.data.data() + size_t(i) * n;
    double mean = 0;
    for (int j = 0; j < n; ++j) mean += double(row[j]);
    mean /= n;
    double var = 0;
    for (int j = 0; j < n; ++j) {
      const double d = double(row[j]) - mean;
      var += d * d;
    }
    var /= n;
    const double rstd = 1.0 / std::sqrt(var + double(eps));
    (*stats)[size_t(i) * 2] = T(mean);
    (*stats)[size_t(i) * 2 + 1] = T(rstd);
    T* o = out.data.data() + size_t(i) * n;
    for (int j = 0; j < n; ++j)
      o[j] = T((double(row[j]) - mean) * rstd) * gv.data[size_t(j)] + bv.data[size_t(j)];
  }
  const bool tracked = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  const int y = t.make_node(std::move(out), tracked);
  if (t.recording() && tracked)
    t.push_op([&t, x, gamma, beta, y, m, n, stats] {
      const Tensor<T>& g = t.grad(y);
      const Tensor<T>& xv2 = t.val(x);
      const Tensor<T>& gv2 = t.val(gamma);
      for (int i = 0; i < m; ++i) {
        const T mean = (*stats)[size_t(i) * 2];
        const T rstd = (*stats)[size_t(i) * 2 + 1];
        const T* row = xv2.data.data() + size_t(i) * n;
        const T* gr = g.data.data() + size_t(i) * n;
        if (t.needs_grad(gamma) || t.needs_grad(beta)) {
          Tensor<T>& gg = t.grad(gamma);
          Tensor<T>& gb = t.grad(beta);
          for (int j = 0; j < n; ++j) {
            const T xhat = (row[j] - mean) * rstd;
            if (t.needs_grad(gamma)) gg.data[size_t(j)] += gr[j] * xhat;
            if (t.needs_grad(beta)) gb.data[size_t(j)] += gr[j];
          }
        }
        if (t.needs_grad(x)) {
          double m1 = 0, m2 = 0;
          for (int j = 0; j < n; ++j) {
            const double gj = double(gr[j]) * double(gv2.data[size_t(j)]);
            const double xhat = double(row[j] - mean) * double(rstd);
            m1 += gj;
            m2 += gj * xhat;
          }
          m1 /= n;
          m2 /= n;
          Tensor<T>& gx = t.grad(x);
          T* gxr = gx.data.data() + size_t(i) * n;
          for (int j = 0; j < n; ++j) {
            const double gj = double(gr[j]) * double(gv2.data[size_t(j)]);
            const double xhat = double(row[j] - mean) * double(rstd);
            gxr[j] += T(double(rstd) * (gj - m1 - xhat * m2));
          }
        }
      }
    });
  return y;
}

template <typename T>
int softmax(Tape<T>& t, int x) {
  const Tensor<T>& xv = t.val(x);
  const int m = xv.rows(), n = xv.cols();
  Tensor<T> out({m, n});
  for (int i = 0; i < m; ++i) {
    const T* row = xv.data.data() + size_t(i) * n;
    T mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double denom = 0;
    T* o = out.data.data() + size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      o[j] = T(std::exp(double(row[j] - mx)));
      denom += double(o[j]);
    }
    for (int j = 0; j < n; ++j) o[j] = T(double(o[j]) / denom);
  }
  const int y = t.make_node(std::move(out), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y, m, n] {
      const Tensor<T>& g = t.grad(y);
      const Tensor<T>& yv = t.val(y);
      Tensor<T>& gx = t.grad(x);
      for (int i = 0; i < m; ++i) {
        const T* gr = g.data.data() + size_t(i) * n;
        const T* yr = yv.data.data() + size_t(i) * n;
        double dotv = 0;
        for (int j = 0; j < n; ++j) dotv += double(gr[j]) * double(yr[j]);
        T* gxr = gx.data.data() + size_t(i) * n;
        for (int j = 0; j < n; ++j) gxr[j] += T(double(yr[j]) * (double(gr[j]) - dotv));
      }
    });
  return y;
}

template <typename T>
int gelu(Tape<T>& t, int x) {
  static const double kInvSqrt2 = 0.70710678118654752440;
  static const double kInvSqrt2Pi = 0.39894228040143267794;
  Tensor<T> out = t.val(x);
  for (auto& v : out.data) {
    const double u = double(v);
    v = T(0.5 * u * (1.0 + std::erf(u * kInvSqrt2)));
  }
  const int y = t.make_node(std::move(out), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y] {
      const Tensor<T>& g = t.grad(y);
      const Tensor<T>& xv = t.val(x);
      Tensor<T>& gx = t.grad(x);
      for (int64_t i = 0; i < g.size(); ++i) {
        const double u = double(xv.data[size_t(i)]);
        const double cdf = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
        gx.data[size_t(i)] += g.data[size_t(i)] * T(cdf + u * pdf);
      }
    });
  return y;
}

template <typename T>
int sum_all(Tape<T>& t, int x) {
  double total = 0;
  for (T v : t.val(x).data) total += double(v);
  const int y = t.make_node(Tensor<T>::scalar(T(total)), t.needs_grad(x));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, x, y] {
      const T g = t.grad(y).data[0];
      Tensor<T>& gx = t.grad(x);
      for (auto& v : gx.data) v += g;
    });
  return y;
}

// weighted sum of scalar nodes
template <typename T>
int add_scalars(Tape<T>& t, const std::vector<std::pair<int, T>>& terms) {
  if (terms.empty()) throw numeric_error("add_scalars: no terms");
  double total = 0;
  bool tracked = false;
  for (const auto& [id, w] : terms) {
    if (t.val(id).size() != 1) throw numeric_error("add_scalars: non-scalar term");
    total += double(w) * double(t.val(id).data[0]);
    tracked = tracked || t.needs_grad(id);
  }
  const int y = t.make_node(Tensor<T>::scalar(T(total)), tracked);
  if (t.recording() && tracked)
    t.push_op([&t, y, terms] {
      const T g = t.grad(y).data[0];
      for (const auto& [id, w] : terms)
        if (t.needs_grad(id)) t.grad(id).data[0] += w * g;
    });
  return y;
}

// Multi-head scaled dot-product attention. q [Sq,d]; k,v [Sk,d]; the first
// kv_valid key positions are attendable, the causal mask additionally
// restricts query i to keys j <= i (requires Sq == Sk).
template <typename T>
int attention(Tape<T>& t, int q, int k, int v, int heads, bool causal, int kv_valid) {
  const Tensor<T>& qv = t.val(q);
  const Tensor<T>& kv = t.val(k);
  const Tensor<T>& vv = t.val(v);
  const int sq = qv.rows(), sk = kv.rows(), d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || vv.rows() != sk)
    throw numeric_error("attention: shape mismatch");
  if (heads <= 0 || d % heads != 0)
    throw numeric_error("attention: model width not divisible by head count");
  if (causal && sq != sk) throw numeric_error("attention: causal mask requires Sq == Sk");
  if (kv_valid < 0 || kv_valid > sk) throw numeric_error("attention: bad kv_valid");
  const int dh = d / heads;
  const T alpha = T(1.0 / std::sqrt(double(dh)));

  struct Ctx {
    std::vector<Tensor<T>> qs, kh, vh, p;  // per head: scaled Q, K, V, softmax weights
  };
  auto ctx = std::make_shared<Ctx>();
  Tensor<T> out({sq, d});

  for (int h = 0; h < heads; ++h) {
    Tensor<T> qs({sq, dh}), kh({sk, dh}), vh({sk, dh});
    for (int i = 0; i < sq; ++i)
      for (int j = 0; j < dh; ++j)
        qs.data[size_t(i) * dh + j] = qv.data[size_t(i) * d + h * dh + j] * alpha;
    for (int i = 0; i < sk; ++i)
      for (int j = 0; j < dh; ++j) {
        kh.data[size_t(i) * dh + j] = kv.data[size_t(i) * d + h * dh + j];
        vh.data[size_t(i) * dh + j] = vv.data[size_t(i) * d + h * dh + j];
      }
    Tensor<T> scores({sq, sk});
    mm_nt(qs.data.data(), kh.data.data(), scores.data.data(), sq, dh, sk);
    // masked softmax; rows with no attendable key produce zeros
    for (int i = 0; i < sq; ++i) {
      const int limit = std::min(kv_valid, causal ? i + 1 : sk);
      T* row = scores.data.data() + size_t(i) * sk;
      if (limit <= 0) {
        std::fill(row, row + sk, T(0));
        continue;
      }
      T mx = row[0];
      for (int j = 1; j < limit; ++j) mx = std::max(mx, row[j]);
      double denom = 0;
      for (int j = 0; j < limit; ++j) {
        row[j] = T(std::exp(double(row[j] - mx)));
        denom += double(row[j]);
      }
      for (int j = 0; j < limit; ++j) row[j] = T(double(row[j]) / denom);
      std::fill(row + limit, row + sk, T(0));
    }
    Tensor<T> oh({sq, dh});
    mm_nn(scores.data.data(), vh.data.data(), oh.data.data(), sq, sk, dh);
    for (int i = 0; i < sq; ++i)
      for (int j = 0; j < dh; ++j)
        out.data[size_t(i) * d + h * dh + j] = oh.data[size_t(i) * dh + j];
    if (t.recording()) {
      ctx->qs.push_back(std::move(qs));
      ctx->kh.push_back(std::move(kh));
      ctx->vh.push_back(std::move(vh));
      ctx->p.push_back(std::move(scores));
    }
  }

  const bool tracked = t.needs_grad(q) || t.needs_grad(k) || t.needs_grad(v);
  const int y = t.make_node(std::move(out), tracked);
  if (t.recording() && tracked)
    t.push_op([&t, q, k, v, y, heads, sq, sk, d, dh, alpha, ctx] {
      const Tensor<T>& g = t.grad(y);
      for (int h = 0; h < heads; ++h) {
        const Tensor<T>& qs = ctx->qs[size_t(h)];
        const Tensor<T>& kh = ctx->kh[size_t(h)];
        const Tensor<T>& vh = ctx->vh[size_t(h)];
        const Tensor<T>& p = ctx->p[size_t(h)];
        Tensor<T> go({sq, dh});
        for (int i = 0; i < sq; ++i)
          for (int j = 0; j < dh; ++j)
            go.data[size_t(i) * dh + j] = g.data[size_t(i) * d + h * dh + j];
        // dV = P^T * dO
        Tensor<T> dv({sk, dh});
        mm_tn_acc(p.data.data(), go.data.data(), dv.data.data(), sq, sk, dh);
        // dP = dO * V^T
        Tensor<T> dp({sq, sk});
        mm_nt(go.data.data(), vh.data.data(), dp.data.data(), sq, dh, sk);
        // dS = P .* (dP - rowsum(dP .* P))
        Tensor<T> ds({sq, sk});
        for (int i = 0; i < sq; ++i) {
          const T* pi = p.data.data() + size_t(i) * sk;
          const T* dpi = dp.data.data() + size_t(i) * sk;
          double dotv = 0;
          for (int j = 0; j < sk; ++j) dotv += double(dpi[j]) * double(pi[j]);
          T* dsi = ds.data.data() + size_t(i) * sk;
          for (int j = 0; j < sk; ++j)
            dsi[j] = T(double(pi[j]) * (double(dpi[j]) - dotv));
        }
        if (t.needs_grad(q)) {
          Tensor<T> dq({sq, dh});
          mm_nn(ds.data.data(), kh.data.data(), dq.data.data(), sq, sk, dh);
          Tensor<T>& gq = t.grad(q);
          for (int i = 0; i < sq; ++i)
            for (int j = 0; j < dh; ++j)
              gq.data[size_t(i) * d + h * dh + j] += alpha * dq.data[size_t(i) * dh + j];
        }
        if (t.needs_grad(k)) {
          Tensor<T> dk({sk, dh});
          mm_tn_acc(ds.data.data(), qs.data.data(), dk.data.data(), sq, sk, dh);
          Tensor<T>& gk = t.grad(k);
          for (int i = 0; i < sk; ++i)
            for (int j = 0; j < dh; ++j)
              gk.data[size_t(i) * d + h * dh + j] += dk.data[size_t(i) * dh + j];
        }
        if (t.needs_grad(v)) {
          Tensor<T>& gv = t.grad(v);
          for (int i = 0; i < sk; ++i)
            for (int j = 0; j < dh; ++j)
              gv.data[size_t(i) * d + h * dh + j] += dv.data[size_t(i) * dh + j];
        }
      }
    });
  return y;
}

// mean over rows of -log softmax(logits)[target]
template <typename T>
int cross_entropy(Tape<T>& t, int logits, std::vector<int> targets) {
  const Tensor<T>& lv = t.val(logits);
  const int n = lv.rows(), vocab = lv.cols();
  if (int(targets.size()) != n) throw numeric_error("cross_entropy: target count mismatch");
  for (int tgt : targets)
    if (tgt < 0 || tgt >= vocab) throw data_error("cross_entropy: target out of range");
  auto lse = std::make_shared<std::vector<double>>(size_t(n));
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const T* row = lv.data.data() + size_t(i) * vocab;
    T mx = row[0];
    for (int j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    double sum = 0;
    for (int j = 0; j < vocab; ++j) sum += std::exp(double(row[j] - mx));
    const double row_lse = double(mx) + std::log(sum);
    (*lse)[size_t(i)] = row_lse;
    total += row_lse - double(row[targets[size_t(i)]]);
  }
  const int y = t.make_node(Tensor<T>::scalar(T(total / n)), t.needs_grad(logits));
  if (t.recording() && t.needs_grad(y))
    t.push_op([&t, logits, y, n, vocab, lse, targets = std::move(targets)] {
      const double gscale = double(t.grad(y).data[0]) / n;
      const Tensor<T>& lv2 = t.val(logits);
      Tensor<T>& gl = t.grad(logits);
      for (int i = 0; i < n; ++i) {
        const T* row = lv2.data.data() + size_t(i) * vocab;
        T* gr = gl.data.data() + size_t(i) * vocab;
        const double row_lse = (*lse)[size_t(i)];
        for (int j = 0; j < vocab; ++j) {
          double p = std::exp(double(row[j]) - row_lse);
          if (j == targets[size_t(i)]) p -= 1.0;
          gr[j] += T(gscale * p);
        }
      }
    });
  return y;
}

// argmax with lowest-index tie-break
template <typename T>
int argmax_row(const Tensor<T>& m, int row) {
  const int n = m.cols();
  const T* r = m.data.data() + size_t(row) * n;
  int best = 0;
  for (int j = 1; j < n; ++j)
    if (r[j] > r[best]) best = j;
  return best;
}

}  // namespace facetok
