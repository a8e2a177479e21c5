#pragma once

#include <Eigen/Core>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "cpgm/errors.hpp"

namespace cpgm {

using Scalar = double;
using Array = Eigen::ArrayX<Scalar>;
using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Reverse-mode autodiff node. Values are stored flat in row-major order;
// `parents` plus `backprop` form the tape. Leaf parameters are created with
// grad_enabled = true; interior nodes inherit it whenever a differentiable
// path to a tracked leaf exists and gradient recording is on.
class Tensor : public std::enable_shared_from_this<Tensor> {
 public:
  Shape shape;
  Array values;
  bool grad_enabled = false;
  Array grad;  // empty until a backward pass touches this node

  std::vector<TensorPtr> parents;
  std::function<void(Tensor&)> backprop;  // accumulates this->grad into parents

  static TensorPtr create(Shape shape, Array values, bool grad_enabled = false);
  static TensorPtr scalar(Scalar v, bool grad_enabled = false);
  static TensorPtr zeros(Shape shape, bool grad_enabled = false);
  static TensorPtr full(Shape shape, Scalar v, bool grad_enabled = false);
  static TensorPtr from_values(Shape shape, std::initializer_list<Scalar> vals,
                               bool grad_enabled = false);

  Eigen::Index size() const { return values.size(); }
  Eigen::Index dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return values.size() == 1; }

  // Scalar read; throws on non-scalar tensors.
  Scalar value() const;

  void accumulate(const Array& g);
  void zero_grad();
  bool has_grad() const { return grad.size() == values.size() && values.size() > 0; }

  // Detached copy: same values, no history, no gradient tracking.
  TensorPtr detach() const;
};

// Scopes where gradient recording is suspended (inference, detector fitting).
bool autograd_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Whether an op consuming these inputs must record a backward function.
bool track_gradients(const std::vector<TensorPtr>& inputs);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable node with grad_enabled; repeated calls without zeroing add up.
void backward(const TensorPtr& loss);

}  // namespace cpgm
