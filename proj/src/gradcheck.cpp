#include "hbm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hbm {

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double h) {
  Tensor x = Tensor::from_data(point.shape(),
                               std::vector<double>(point.data().begin(),
                                                   point.data().end()),
                               true);
  backward(f(x));
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  auto values = x.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + h;
    const double up = f(x).item();
    values[i] = orig - h;
    const double down = f(x).item();
    values[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * h)));
  }
  return worst;
}

std::vector<ParamCheck> grad_check_params(const std::function<Tensor()>& loss,
                                          std::vector<NamedTensor> params,
                                          double h) {
  for (auto& p : params) p.tensor.zero_grad();
  backward(loss());

  std::vector<ParamCheck> report;
  NoGradGuard no_grad;
  for (auto& p : params) {
    std::vector<double> analytic(p.tensor.numel(), 0.0);
    if (p.tensor.has_grad()) {
      std::copy(p.tensor.grad().begin(), p.tensor.grad().end(),
                analytic.begin());
    }
    ParamCheck check{p.name, 0.0, analytic.size()};
    auto values = p.tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = loss().item();
      values[i] = orig - h;
      const double down = loss().item();
      values[i] = orig;
      check.max_error = std::max(
          check.max_error, relative_error(analytic[i], (up - down) / (2 * h)));
    }
    report.push_back(std::move(check));
  }
  return report;
}

}  // namespace hbm
