#pragma once

#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "facetok/tensor.hpp"

namespace facetok {

// Reverse-mode tape. Ops append their backward closures in execution order;
// backward() zeroes node gradients, seeds the loss with 1 and replays the
// closures in reverse, then accumulates leaf gradients into the registered
// Parameters (so repeated backward calls add up).
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;  // closures hold `this`

  int constant(Tensor<T> value) { return make_node(std::move(value), false); }

  // grad-tracked leaf that is not a parameter (gradcheck inputs)
  int input(Tensor<T> value) { return make_node(std::move(value), recording_); }

  int param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    const int id = make_node(p.value, recording_);
    param_nodes_.emplace(&p, id);
    params_.push_back({&p, id});
    return id;
  }

  int make_node(Tensor<T> value, bool needs_grad) {
#if !defined(NDEBUG)
    if (!value.all_finite()) throw numeric_error("non-finite value produced on tape");
#endif
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, needs_grad});
    return int(nodes_.size()) - 1;
  }

  void push_op(std::function<void()> backward) {
    if (recording_) ops_.push_back(std::move(backward));
  }

  Tensor<T>& val(int id) { return nodes_[size_t(id)].value; }
  const Tensor<T>& val(int id) const { return nodes_[size_t(id)].value; }

  // gradient buffer, allocated (zeroed) on first touch
  Tensor<T>& grad(int id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.shape != n.value.shape) n.grad = Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }

  bool needs_grad(int id) const { return nodes_[size_t(id)].needs_grad; }
  bool recording() const { return recording_; }

  void backward(int loss_id) {
    if (!recording_) throw numeric_error("backward on a non-recording tape");
    if (val(loss_id).size() != 1) throw numeric_error("backward expects a scalar loss");
    for (auto& n : nodes_) n.grad = Tensor<T>{};
    grad(loss_id).data[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    for (auto& [p, id] : params_) {
      Tensor<T>& g = grad(id);
      for (int64_t i = 0; i < g.size(); ++i) p->grad.data[size_t(i)] += g.data[size_t(i)];
    }
  }

  // leaf gradient as recorded on this tape (pre-accumulation), for tests
  const Tensor<T>& leaf_grad(int id) { return grad(id); }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> ops_;
  std::vector<std::pair<Parameter<T>*, int>> params_;
  std::unordered_map<const void*, int> param_nodes_;
  bool recording_ = true;
};

}  // namespace facetok
