// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "lowlight/tensor.hpp"

namespace lowlight {

/// Compares the autodiff gradient of a scalar function against central
/// finite differences with step h. The error is normalized by the larger
/// gradient magnitude: max|g_ad - g_fd| / max(max|g_ad|, max|g_fd|, 1e-12).
/// `x` must be a leaf; its data is perturbed in place and restored.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

}  // namespace lowlight
