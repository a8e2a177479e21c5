#include "cpgm/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace cpgm {

Eigen::Index shape_numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

TensorPtr Tensor::create(Shape shape, Array values, bool grad_enabled) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->grad_enabled = grad_enabled;
  return t;
}

TensorPtr Tensor::scalar(Scalar v, bool grad_enabled) {
  Array a(1);
  a[0] = v;
  return create({}, std::move(a), grad_enabled);
}

TensorPtr Tensor::zeros(Shape shape, bool grad_enabled) {
  const Eigen::Index n = shape_numel(shape);
  return create(std::move(shape), Array::Zero(n), grad_enabled);
}

TensorPtr Tensor::full(Shape shape, Scalar v, bool grad_enabled) {
  const Eigen::Index n = shape_numel(shape);
  return create(std::move(shape), Array::Constant(n, v), grad_enabled);
}

TensorPtr Tensor::from_values(Shape shape, std::initializer_list<Scalar> vals,
                              bool grad_enabled) {
  Array a(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (Scalar v : vals) a[i++] = v;
  return create(std::move(shape), std::move(a), grad_enabled);
}

Scalar Tensor::value() const {
  if (!is_scalar()) {
    throw ContractError("value() requires a scalar tensor, got shape " +
                        shape_to_string(shape));
  }
  return values[0];
}

void Tensor::accumulate(const Array& g) {
  if (!grad_enabled) return;
  if (g.size() != values.size()) {
    throw ShapeError("gradient length " + std::to_string(g.size()) +
                     " does not match tensor of shape " + shape_to_string(shape));
  }
  if (grad.size() != values.size()) grad = Array::Zero(values.size());
  grad += g;
}

void Tensor::zero_grad() {
  if (grad.size() == values.size()) {
    grad.setZero();
  } else if (grad_enabled) {
    grad = Array::Zero(values.size());
  }
}

TensorPtr Tensor::detach() const { return create(shape, values, false); }

namespace {
thread_local bool g_autograd = true;
}

bool autograd_enabled() { return g_autograd; }

NoGradGuard::NoGradGuard() : previous_(g_autograd) { g_autograd = false; }
NoGradGuard::~NoGradGuard() { g_autograd = previous_; }

bool track_gradients(const std::vector<TensorPtr>& inputs) {
  if (!g_autograd) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const TensorPtr& t) { return t && t->grad_enabled; });
}

void backward(const TensorPtr& loss) {
  if (!loss) throw ContractError("backward: null loss");
  if (!loss->is_scalar()) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_to_string(loss->shape));
  }
  if (!loss->grad_enabled) {
    throw ContractError("backward: loss is not connected to any tracked parameter");
  }

  // Iterative post-order DFS; graphs can be deep for unrolled conv stacks.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> visited;
  struct Frame {
    Tensor* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Tensor* p = f.node->parents[f.next_parent++].get();
      if (p && p->grad_enabled && visited.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss->accumulate(Array::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backprop && node->has_grad()) node->backprop(*node);
  }
}

}  // namespace cpgm
