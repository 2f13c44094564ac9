// core/include/spex/nn/tensor.h

// Copyright 2026 SpEx Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEX_NN_TENSOR_H_
#define SPEX_NN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spex::nn {

/// (batch x channels x frames). Weights reuse the same triple with their own
/// reading, e.g. a conv kernel is (out x in/groups x kernel).
struct Shape {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t frames = 1;

  std::size_t size() const { return batch * channels * frames; }
  bool operator==(const Shape &) const = default;
  std::string str() const;
};

/// One value in the computation graph. Ops record a backward closure that
/// accumulates into the parents' grad buffers.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;

  void EnsureGrad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Handle to a graph node with value semantics on the handle.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var Constant(Shape shape, std::vector<double> values);
  static Var Constant(Shape shape, double fill = 0.0);
  static Var Parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape &shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::span<const double> value() const { return node_->value; }
  std::vector<double> &mutable_value() { return node_->value; }
  // Empty when no gradient has reached this node.
  std::span<const double> grad() const { return node_->grad; }
  std::vector<double> &mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double item() const { return node_->value.at(0); }
  double at(std::size_t b, std::size_t c, std::size_t t) const {
    const Shape &s = node_->shape;
    return node_->value[(b * s.channels + c) * s.frames + t];
  }

  void ZeroGrad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
  }
  Node *node() const { return node_.get(); }
  const std::shared_ptr<Node> &ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Seeds d(root)/d(root) = 1 and runs every recorded backward closure in
/// reverse topological order. Root must hold a single element.
void Backward(const Var &root);

bool GradEnabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};

/// Builds an op result. The closure is kept only when recording is enabled
/// and some parent requires a gradient.
Var MakeResult(Shape shape, std::vector<double> value, std::vector<Var> parents,
               std::function<void(Node &)> backward);

}  // namespace spex::nn

#endif  // SPEX_NN_TENSOR_H_
