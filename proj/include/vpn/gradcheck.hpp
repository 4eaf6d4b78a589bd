#pragma once

#include <functional>
#include <string>

#include "vpn/tensor.hpp"

namespace vpn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  long long worst_index = -1;
  bool nonfinite = false;       // some evaluation produced a non-finite value
  long long nonfinite_index = -1;
  double tolerance = 0.0;

  bool passed() const { return !nonfinite && max_rel_error <= tolerance; }
  std::string summary() const;
};

// Compares reverse-mode gradients of f against central finite differences,
// coordinate by coordinate. f must be deterministic; non-scalar outputs are
// summed before differentiation. Relative error uses max(1, |a|, |n|) as the
// scale, so tiny gradients are held to an absolute bar.
GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& at, double tolerance,
                                  double step = 1e-5);

}  // namespace vpn
