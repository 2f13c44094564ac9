// core/src/nn/tensor.cc

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

#include "spex/nn/tensor.h"

#include <unordered_set>
#include <utility>

#include "spex/error.h"

namespace spex::nn {
namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string Shape::str() const {
  return "(" + std::to_string(batch) + "x" + std::to_string(channels) + "x" +
         std::to_string(frames) + ")";
}

Var Var::Constant(Shape shape, std::vector<double> values) {
  if (values.size() != shape.size())
    throw Error(Errc::kShapeMismatch, "constant " + shape.str() + " given " +
                                          std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(values);
  return Var(std::move(n));
}

Var Var::Constant(Shape shape, double fill) {
  return Constant(shape, std::vector<double>(shape.size(), fill));
}

Var Var::Parameter(Shape shape, std::vector<double> values) {
  Var v = Constant(shape, std::move(values));
  v.node()->requires_grad = true;
  return v;
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var MakeResult(Shape shape, std::vector<double> value, std::vector<Var> parents,
               std::function<void(Node &)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  bool track = false;
  if (g_grad_enabled) {
    for (const auto &p : parents) track = track || p.requires_grad();
  }
  if (track) {
    n->requires_grad = true;
    n->backward = std::move(backward);
    n->parents.reserve(parents.size());
    for (auto &p : parents) n->parents.push_back(p.ptr());
  }
  return Var(std::move(n));
}

void Backward(const Var &root) {
  if (!root.defined() || root.size() != 1)
    throw Error(Errc::kShapeMismatch, "backward needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node *> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<Node *, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      Node *p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node *n : order) n->EnsureGrad();
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace spex::nn
