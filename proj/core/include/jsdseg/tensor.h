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

// Dense tensors with tape-free reverse-mode automatic differentiation.
//
// A tensor is a shared handle to a TensorImpl that owns its values, an
// optional gradient buffer and, for op results, the GradNode that produced
// it. The graph is the DAG formed by GradNode::inputs; it lives exactly as
// long as the tensors that reference it.

#ifndef JSDSEG_TENSOR_H_
#define JSDSEG_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace jsd {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

template <typename T>
class BasicTensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct GradNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Called with the gradient of the node's output; accumulates into the
  // gradients of whichever inputs require them.
  std::function<void(std::span<const T>)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<GradNode<T>> node;

  std::span<T> EnsureGrad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Graph recording is on by default and can be suspended per thread.
bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor Zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor Full(Shape shape, T value);
  static BasicTensor Scalar(T value) { return Full({}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  size_t rank() const { return impl_->shape.size(); }
  int64_t dim(size_t axis) const { return impl_->shape.at(axis); }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on = true);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->EnsureGrad(); }
  void zero_grad() { impl_->grad.clear(); }

  // Reverse-mode sweep from a scalar. Gradients accumulate into every leaf
  // that requires them; call zero_grad() between steps.
  void Backward() const;

  // Same values, no history.
  BasicTensor Detach() const;

  BasicTensor Reshape(Shape shape) const;

  template <typename U>
  BasicTensor<U> Cast() const;

  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }
  explicit BasicTensor(std::shared_ptr<detail::TensorImpl<T>> impl)
      : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Creates the result of a differentiable op. The node is recorded only if
// recording is enabled and some input requires a gradient.
template <typename T>
BasicTensor<T> MakeResult(Shape shape, std::vector<T> values,
                          const std::vector<BasicTensor<T>>& inputs,
                          const char* op,
                          std::function<void(std::span<const T>)> backward);

// Gradient buffer of `t` if it takes part in differentiation, else empty.
template <typename T>
std::span<T> GradSink(const BasicTensor<T>& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  return t.impl()->EnsureGrad();
}

}  // namespace jsd

#endif  // JSDSEG_TENSOR_H_
