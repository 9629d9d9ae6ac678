// Copyright 2026 The K-SENSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KSENSE_SRC_GRAPH_HPP_
#define KSENSE_SRC_GRAPH_HPP_

// Helpers shared by the op implementations. Not installed.

#include <initializer_list>
#include <string>

#include "ksense/error.hpp"
#include "ksense/tensor.hpp"

namespace ksense::detail {

// Builds the result node of an op. The backward closure and parent links are
// kept only when recording is enabled and some parent requires a gradient.
inline Tensor make_result(Shape shape, std::vector<double> value,
                          std::initializer_list<Tensor> parents,
                          std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (grad_recording_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

inline Tensor make_result(Shape shape, std::vector<double> value,
                          const std::vector<Tensor>& parents,
                          std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (grad_recording_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Gradient sink of a parent, or nullptr when it does not need one.
inline std::vector<double>* grad_sink(Node& parent) {
  return parent.requires_grad ? &parent.ensure_grad() : nullptr;
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

}  // namespace ksense::detail

#endif  // KSENSE_SRC_GRAPH_HPP_
