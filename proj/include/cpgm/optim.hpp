#pragma once

#include <map>
#include <string>
#include <vector>

#include "cpgm/tensor.hpp"

namespace cpgm {

// Named trainable tensors with deterministic (sorted) iteration order.
class ParameterSet {
 public:
  TensorPtr add(const std::string& name, TensorPtr t);
  const TensorPtr& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }

  std::vector<std::string> names() const;
  void zero_grads();

  // Parameters whose names start with any of the given prefixes.
  ParameterSet subset(const std::vector<std::string>& prefixes) const;
  void merge(const ParameterSet& other);

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, TensorPtr> params_;
};

struct OptimizerState {
  Scalar learning_rate;
  Scalar momentum = 0.0;
};

// One SGD update: w <- w - lr * (momentum-adjusted grad); grads are zeroed
// afterwards. Every parameter in the set must carry a populated gradient.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(OptimizerState state);
  void step(ParameterSet& params);
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerState state_;
  std::map<std::string, Array> velocity_;
};

void sgd_step(ParameterSet& params, SgdOptimizer& opt);

}  // namespace cpgm
