#include "cpgm/gaussian.hpp"

namespace cpgm {

namespace {
void require_positive(const TensorPtr& var, const char* op) {
  if ((var->values <= 0.0).any()) {
    throw DomainError(std::string(op) + ": variance must be strictly positive");
  }
}
}  // namespace

std::pair<TensorPtr, TensorPtr> merge_gaussian(const TensorPtr& mu, const TensorPtr& var,
                                               const TensorPtr& mu_tilde,
                                               const TensorPtr& var_tilde) {
  require_positive(var, "merge_gaussian");
  require_positive(var_tilde, "merge_gaussian");
  auto inv = reciprocal(var);
  auto inv_tilde = reciprocal(var_tilde);
  auto q_var = reciprocal(add(inv, inv_tilde));
  auto q_mu = mul(add(mul(mu_tilde, inv_tilde), mul(mu, inv)), q_var);
  return {q_mu, q_var};
}

TensorPtr kl_conditional(const TensorPtr& mu, const TensorPtr& var, const TensorPtr& mu_k) {
  require_positive(var, "kl_conditional");
  auto diff = sub(mu, mu_k);
  auto terms = sub(sub(add_scalar(log_t(var), 1.0), mul(diff, diff)), var);
  return mul_scalar(sum_all(terms), -0.5);
}

TensorPtr kl_gaussian(const TensorPtr& q_mu, const TensorPtr& q_var, const TensorPtr& p_mu,
                      const TensorPtr& p_var) {
  require_positive(q_var, "kl_gaussian");
  require_positive(p_var, "kl_gaussian");
  auto diff = sub(q_mu, p_mu);
  auto terms = add_scalar(
      add(log_t(cdiv(p_var, q_var)), cdiv(add(q_var, mul(diff, diff)), p_var)), -1.0);
  return mul_scalar(sum_all(terms), 0.5);
}

}  // namespace cpgm
