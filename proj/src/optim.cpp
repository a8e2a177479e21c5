#include "cpgm/optim.hpp"

#include <algorithm>

namespace cpgm {

TensorPtr ParameterSet::add(const std::string& name, TensorPtr t) {
  if (!t) throw ContractError("ParameterSet::add: null tensor for " + name);
  if (!t->grad_enabled) {
    throw ContractError("ParameterSet::add: " + name + " must be grad-enabled");
  }
  auto [it, inserted] = params_.emplace(name, std::move(t));
  if (!inserted) throw ContractError("ParameterSet::add: duplicate name " + name);
  return it->second;
}

const TensorPtr& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("ParameterSet: unknown parameter " + name);
  return it->second;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

void ParameterSet::zero_grads() {
  for (auto& [_, t] : params_) t->zero_grad();
}

ParameterSet ParameterSet::subset(const std::vector<std::string>& prefixes) const {
  ParameterSet out;
  for (const auto& [name, t] : params_) {
    for (const auto& p : prefixes) {
      if (name.rfind(p, 0) == 0) {
        out.params_.emplace(name, t);
        break;
      }
    }
  }
  return out;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [name, t] : other.params_) {
    if (!params_.emplace(name, t).second) {
      throw ContractError("ParameterSet::merge: duplicate name " + name);
    }
  }
}

SgdOptimizer::SgdOptimizer(OptimizerState state) : state_(state) {
  if (!(state_.learning_rate > 0.0)) {
    throw ContractError("SgdOptimizer: learning_rate must be positive");
  }
  if (state_.momentum < 0.0) {
    throw ContractError("SgdOptimizer: momentum must be non-negative");
  }
}

void SgdOptimizer::step(ParameterSet& params) {
  for (const auto& [name, t] : params) {
    if (!t->has_grad()) {
      throw ContractError("sgd_step: missing gradient for parameter " + name);
    }
    if (state_.momentum > 0.0) {
      auto it = velocity_.find(name);
      if (it == velocity_.end()) {
        it = velocity_.emplace(name, Array::Zero(t->size())).first;
      }
      it->second = state_.momentum * it->second + t->grad;
      t->values -= state_.learning_rate * it->second;
    } else {
      t->values -= state_.learning_rate * t->grad;
    }
    t->grad.setZero();
  }
}

void sgd_step(ParameterSet& params, SgdOptimizer& opt) { opt.step(params); }

}  // namespace cpgm
