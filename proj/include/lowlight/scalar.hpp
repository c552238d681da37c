// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace lowlight {

// Element type of every autodiff tensor. Production builds use 32-bit floats;
// the gradient-check test suite compiles the same sources with doubles.
#ifdef LOWLIGHT_DOUBLE_PRECISION
using Scalar = double;
#else
using Scalar = float;
#endif

}  // namespace lowlight
