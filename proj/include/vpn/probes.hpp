#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpn/config.hpp"

namespace vpn {

// Structural diagnostics run on freshly initialized random models. Each probe
// returns measured numbers plus a pass flag so callers can print or assert.

// Exhaustively perturbs every input coordinate of a random video and checks
// that decoder outputs at positions up to and including the perturbed
// coordinate (in (t, i, j, c) order) never change by a single bit. For the
// efficacy check, at least one perturbation must move some later output.
struct CausalityResult {
  long long perturbations = 0;
  long long leaked_coordinates = 0;  // prefix positions that changed
  bool later_changed = false;
  double seconds = 0.0;

  bool passed() const { return leaked_coordinates == 0 && later_changed; }
};

CausalityResult causality_probe(const ModelConfig& config, int size, int frames,
                                std::uint64_t seed);

// Same protocol for the temporal baseline: perturbing any pixel of frame t
// must leave the whole of frame t's output unchanged (the decoder sees only
// the recurrent context), while some later frame must react.
CausalityResult baseline_independence_probe(const ModelConfig& config, int size,
                                            int frames, std::uint64_t seed);

// Footprint of d(encoder output at the center pixel)/d(input pixels) for a
// deep encoder stack, measured by exact gradient sparsity. With dilation
// scheme [1,2,4,8] repeated over 8 blocks each 3x3 layer pair widens the
// reach by 2*dilation, plus 1 for the input convolution: half-width
// R = 1 + sum(2d) and the box is (2R+1)^2. Without dilation the same depth
// reaches only R = 1 + 2*blocks.
struct ReceptiveFieldResult {
  int measured_rows = 0;
  int measured_cols = 0;
  int expected_width = 0;
  long long nonzero_outside = 0;  // gradient leaks outside the analytic box
  bool centered = false;

  bool passed() const {
    return measured_rows == expected_width && measured_cols == expected_width &&
           nonzero_outside == 0 && centered;
  }
};

ReceptiveFieldResult receptive_field_probe(bool dilated, int size,
                                           std::uint64_t seed);

// Central finite-difference checks over every block kind: plain, dilated and
// masked convolutions, the multiplicative unit, both residual blocks, the
// recurrent step, both heads, and both losses.
struct GradcheckResult {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::vector<std::string> failed;
  std::vector<std::string> checked;

  bool passed() const { return failed.empty() && !checked.empty(); }
};

GradcheckResult gradcheck_probe(std::uint64_t seed);

// Probability bookkeeping on a random model: per-pixel softmax slices must
// exp-sum to one, and brute-force enumeration of every value of a one-pixel
// video must make the teacher-forced probabilities sum to one.
struct NormalizationResult {
  double worst_slice_error = 0.0;  // max |exp-sum - 1| over decoder slices
  double enumeration_error = 0.0;  // |sum over 256 videos - 1|
  double tolerance = 0.0;

  bool passed() const {
    return worst_slice_error <= tolerance && enumeration_error <= tolerance;
  }
};

NormalizationResult normalization_probe(std::uint64_t seed);

}  // namespace vpn
