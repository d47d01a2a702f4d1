// Copyright 2026 The jsdseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jsdseg/tensor.h"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "jsdseg/errors.h"

namespace jsd {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + ShapeString(shape));
    n *= e;
  }
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  const int64_t n = NumElements(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<size_t>(n), T(0));
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  if (NumElements(shape) != static_cast<int64_t>(values.size())) {
    throw DimensionError("shape " + ShapeString(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Full(Shape shape, T value) {
  BasicTensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw UsageError("item() on tensor of shape " + ShapeString(shape()));
  }
  return impl_->data[0];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (impl_->node && !on) {
    throw UsageError("cannot clear requires_grad on a non-leaf tensor");
  }
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
void BasicTensor<T>::Backward() const {
  if (!defined() || numel() != 1) {
    throw UsageError("Backward() needs a scalar loss, got shape " +
                     (defined() ? ShapeString(shape()) : std::string("<undefined>")));
  }
  if (!impl_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the DAG.
  using Impl = detail::TensorImpl<T>;
  std::vector<Impl*> order;
  std::unordered_set<const Impl*> visited;
  std::vector<std::pair<Impl*, size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node_impl, next] = stack.back();
    const auto& node = node_impl->node;
    if (node && next < node->inputs.size()) {
      Impl* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node_impl);
    stack.pop_back();
  }

  impl_->EnsureGrad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* t = *it;
    if (!t->node) continue;  // leaf: keep the accumulated gradient
    if (!t->grad.empty()) t->node->backward(t->grad);
    // Intermediate gradients are consumed exactly once per sweep.
    std::vector<T>().swap(t->grad);
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Detach() const {
  return BasicTensor(impl_->shape, impl_->data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Reshape(Shape new_shape) const {
  if (NumElements(new_shape) != numel()) {
    throw DimensionError("cannot reshape " + ShapeString(shape()) + " to " +
                         ShapeString(new_shape));
  }
  BasicTensor self = *this;
  return MakeResult<T>(std::move(new_shape), impl_->data, {self}, "reshape",
                       [self](std::span<const T> g) {
                         auto sink = GradSink(self);
                         for (size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
                       });
}

template <typename T>
template <typename U>
BasicTensor<U> BasicTensor<T>::Cast() const {
  std::vector<U> values(impl_->data.begin(), impl_->data.end());
  return BasicTensor<U>(impl_->shape, std::move(values));
}

template <typename T>
BasicTensor<T> MakeResult(Shape shape, std::vector<T> values,
                          const std::vector<BasicTensor<T>>& inputs,
                          const char* op,
                          std::function<void(std::span<const T>)> backward) {
  BasicTensor<T> out(std::move(shape), std::move(values));
  if (!GradEnabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = std::make_shared<detail::GradNode<T>>();
  node->op = op;
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->inputs.push_back(in.impl());
  }
  node->backward = std::move(backward);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<double> BasicTensor<float>::Cast<double>() const;
template BasicTensor<float> BasicTensor<double>::Cast<float>() const;
template BasicTensor<float> BasicTensor<float>::Cast<float>() const;
template BasicTensor<double> BasicTensor<double>::Cast<double>() const;

template BasicTensor<float> MakeResult<float>(
    Shape, std::vector<float>, const std::vector<BasicTensor<float>>&,
    const char*, std::function<void(std::span<const float>)>);
template BasicTensor<double> MakeResult<double>(
    Shape, std::vector<double>, const std::vector<BasicTensor<double>>&,
    const char*, std::function<void(std::span<const double>)>);

}  // namespace jsd
