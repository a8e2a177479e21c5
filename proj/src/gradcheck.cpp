#include "cpgm/gradcheck.hpp"

#include <cmath>

#include "cpgm/rng.hpp"

namespace cpgm {

GradCheckReport finite_difference_report(const LossFn& loss_fn, ParameterSet& params,
                                         Scalar step, int max_coords_per_param) {
  if (!(step > 0.0)) throw ContractError("finite_difference_check: step must be > 0");
  if (params.size() == 0) {
    throw ContractError("finite_difference_check: empty parameter set");
  }

  const Scalar probe = loss_fn()->value();
  if (loss_fn()->value() != probe) {
    throw ContractError(
        "finite_difference_check: loss is not deterministic under a fixed seed");
  }

  params.zero_grads();
  backward(loss_fn());
  std::map<std::string, Array> analytic;
  for (const auto& [name, t] : params) {
    analytic[name] = t->has_grad() ? t->grad : Array::Zero(t->size());
  }
  params.zero_grads();

  RandomSource coord_rng(0x5eedc0de);
  GradCheckReport report;
  for (const auto& [name, t] : params) {
    std::vector<Eigen::Index> coords;
    const Eigen::Index n = t->size();
    if (n <= max_coords_per_param) {
      for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords_per_param; ++i) {
        coords.push_back(static_cast<Eigen::Index>(coord_rng.next_below(
            static_cast<std::uint64_t>(n))));
      }
    }
    Scalar worst = 0.0;
    for (Eigen::Index i : coords) {
      const Scalar saved = t->values[i];
      t->values[i] = saved + step;
      const Scalar plus = loss_fn()->value();
      t->values[i] = saved - step;
      const Scalar minus = loss_fn()->value();
      t->values[i] = saved;
      const Scalar numeric = (plus - minus) / (2.0 * step);
      const Scalar err =
          std::abs(analytic[name][i] - numeric) / std::max<Scalar>(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
    report.per_parameter.push_back({name, worst});
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

Scalar finite_difference_check(const LossFn& loss_fn, ParameterSet& params, Scalar step,
                               int max_coords_per_param) {
  return finite_difference_report(loss_fn, params, step, max_coords_per_param)
      .max_rel_error;
}

}  // namespace cpgm
