// SPDX-License-Identifier: Apache-2.0
#include "lowlight/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lowlight/errors.hpp"

namespace lowlight {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
  x.zero_grad();
  x.set_requires_grad(true);
  Tensor y = f(x);
  y.backward();
  std::vector<double> analytic(x.size(), 0.0);
  if (x.has_grad())
    for (std::size_t i = 0; i < x.size(); ++i) analytic[i] = x.grad()[i];
  x.zero_grad();

  auto values = x.mutable_data();
  double max_diff = 0.0, max_a = 0.0, max_n = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Scalar saved = values[i];
    values[i] = static_cast<Scalar>(saved + h);
    const double up = f(x).item();
    values[i] = static_cast<Scalar>(saved - h);
    const double down = f(x).item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    max_diff = std::max(max_diff, std::fabs(numeric - analytic[i]));
    max_a = std::max(max_a, std::fabs(analytic[i]));
    max_n = std::max(max_n, std::fabs(numeric));
  }
  return max_diff / std::max({max_a, max_n, 1e-12});
}

}  // namespace lowlight
