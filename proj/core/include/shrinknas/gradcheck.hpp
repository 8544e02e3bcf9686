#pragma once

#include <functional>
#include <string>

#include "shrinknas/autodiff.hpp"

namespace shrinknas {

struct GradientCheck {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t parameters_checked = 0;
};

using LossBuilder = std::function<ad::Var(ad::Tape&, const ad::ParameterTable&)>;

/// Compares reverse-mode gradients of `loss` against central differences,
/// parameter tensor by parameter tensor: ||analytic - numeric|| / max(||analytic||, ||numeric||),
/// falling back to the absolute difference when both norms are below 1e-10.
GradientCheck check_gradients(const LossBuilder& loss, const ad::ParameterTable& params,
                              double step = 1e-6);

}  // namespace shrinknas
