#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cpgm/optim.hpp"
#include "cpgm/tensor.hpp"

namespace cpgm {

// The loss closure must rebuild its graph from the current parameter values on
// every call and be deterministic (reconstruct any random source from a fixed
// seed inside the closure).
using LossFn = std::function<TensorPtr()>;

struct GradCheckReport {
  struct Entry {
    std::string name;
    Scalar max_rel_error;
  };
  std::vector<Entry> per_parameter;
  Scalar max_rel_error = 0.0;
};

// Central finite differences against reverse-mode gradients. Relative error is
// |analytic - numeric| / max(1, |numeric|), maximized over sampled coordinates
// (all coordinates when a parameter has at most max_coords_per_param entries;
// otherwise a deterministic sample of that many).
GradCheckReport finite_difference_report(const LossFn& loss_fn, ParameterSet& params,
                                         Scalar step = 1e-5,
                                         int max_coords_per_param = 16);

Scalar finite_difference_check(const LossFn& loss_fn, ParameterSet& params,
                               Scalar step = 1e-5, int max_coords_per_param = 16);

}  // namespace cpgm
