#pragma once

#include <Eigen/Core>
#include <utility>

#include "cpgm/ops.hpp"
#include "cpgm/tensor.hpp"

namespace cpgm {

// Diagonal-Gaussian algebra used by the ladder models and the detector.
// Graph versions (TensorPtr) participate in training; the templated forms
// work directly on Eigen array expressions for inference-time math.

// ---- precision-weighted merge ----------------------------------------------

// q_mu = (mu_td/var_td + mu/var) / (1/var_td + 1/var), q_var = 1/(1/var_td + 1/var).
std::pair<TensorPtr, TensorPtr> merge_gaussian(const TensorPtr& mu, const TensorPtr& var,
                                               const TensorPtr& mu_tilde,
                                               const TensorPtr& var_tilde);

template <typename D1, typename D2, typename D3, typename D4>
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> merge_gaussian_values(
    const Eigen::ArrayBase<D1>& mu, const Eigen::ArrayBase<D2>& var,
    const Eigen::ArrayBase<D3>& mu_tilde, const Eigen::ArrayBase<D4>& var_tilde) {
  Eigen::ArrayXd prec = var.inverse() + var_tilde.inverse();
  Eigen::ArrayXd q_var = prec.inverse();
  Eigen::ArrayXd q_mu = (mu_tilde * var_tilde.inverse() + mu * var.inverse()) * q_var;
  return {std::move(q_mu), std::move(q_var)};
}

// ---- KL divergences ---------------------------------------------------------

// D_KL(N(mu, var) || N(mu_k, I)) = -1/2 sum(1 + log var - (mu - mu_k)^2 - var),
// summed over every element (so a (N,J) input yields the batch total).
TensorPtr kl_conditional(const TensorPtr& mu, const TensorPtr& var, const TensorPtr& mu_k);

// D_KL(N(q_mu, q_var) || N(p_mu, p_var)) for diagonal Gaussians; the unit-prior
// form above is the special case p_var = 1.
TensorPtr kl_gaussian(const TensorPtr& q_mu, const TensorPtr& q_var,
                      const TensorPtr& p_mu, const TensorPtr& p_var);

template <typename D1, typename D2, typename D3>
double kl_conditional_value(const Eigen::ArrayBase<D1>& mu, const Eigen::ArrayBase<D2>& var,
                            const Eigen::ArrayBase<D3>& mu_k) {
  return -0.5 * (1.0 + var.log() - (mu - mu_k).square() - var).sum();
}

template <typename D1, typename D2, typename D3, typename D4>
double kl_gaussian_value(const Eigen::ArrayBase<D1>& q_mu, const Eigen::ArrayBase<D2>& q_var,
                         const Eigen::ArrayBase<D3>& p_mu,
                         const Eigen::ArrayBase<D4>& p_var) {
  return 0.5 *
         ((p_var / q_var).log() + (q_var + (q_mu - p_mu).square()) / p_var - 1.0).sum();
}

}  // namespace cpgm
