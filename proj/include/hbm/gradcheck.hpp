#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hbm/tensor.hpp"

namespace hbm {

// Max over coordinates of |analytic - central_difference| / max(1, |analytic|).
// `f` must map a tensor shaped like `point` to a scalar.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double h = 1e-5);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ParamCheck {
  std::string name;
  double max_error = 0.0;
  std::size_t count = 0;
};

// Same measure, taken for every entry of every leaf in `params` against the
// scalar produced by `loss`. The leaves are perturbed in place and restored.
std::vector<ParamCheck> grad_check_params(const std::function<Tensor()>& loss,
                                          std::vector<NamedTensor> params,
                                          double h = 1e-5);

}  // namespace hbm
