#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

// Outcome of comparing one analytic gradient against central differences.
struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  int coords_checked = 0;
  int coords_rejected = 0;  // skipped because the difference quotient was
                            // inconsistent across step sizes (non-smooth point)
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double seconds = 0.0;

  bool all_passed() const;
};

struct GradCheckOptions {
  // Relative error denominator: max(|analytic|, |fd|, floor), where floor =
  // max(denom_floor, noise_frac * max_i |analytic_i|). The second term models
  // the absolute noise of a float32 forward pass, which scales with the
  // tensor's overall gradient magnitude.
  double denom_floor = 1e-3;
  double noise_frac = 0.05;
  // Absolute noise of one probe evaluation: how far the returned value can
  // drift between nearby evaluations from float32 rounding alone. Budgets and
  // denominators grant every difference quotient an allowance of this divided
  // by the realized step. The default covers a probe that rounds a ~O(1)
  // double once; a probe summing many independently rounded float terms
  // should pass its own estimate.
  double noise_abs = 5e-8;
  // When set, a coordinate whose one-sided secant slopes disagree at both the
  // full step and a quarter step is skipped (the perturbation crossed a kink,
  // so no central difference there reflects the one-sided derivative) and a
  // later candidate takes its place. A candidate with consistent slopes is
  // never skipped, so a genuinely wrong gradient cannot be hidden.
  bool reject_nonsmooth = false;
  // Stop after this many accepted coordinates; 0 means all candidates.
  int target_count = 0;
};

// Compares d(probe)/d(leaf[i]) against a central difference of the probe value
// over candidate coordinates, in order, until target_count coordinates have
// been accepted. The probe must rebuild its graph from the leaf's current
// values on every call and return a single element. The case fails when any
// accepted coordinate exceeds the tolerance or when fewer than half the
// requested coordinates survive the smoothness filter.
GradCheckCase check_gradient(const std::string& name, Tensor leaf,
                             const std::function<Tensor()>& probe,
                             const std::vector<std::int64_t>& candidates, double step,
                             double tolerance, const GradCheckOptions& opts = {});

// Built-in suite: every differentiable primitive at step 1e-3 (tolerance 1e-2,
// inputs kept away from non-smooth points), then a two-stage 2-band -> 4-band
// network probing 20 random coordinates of every parameter at step 1e-2
// (tolerance 2e-2, relu-kink crossings rejected).
GradCheckReport run_gradcheck(std::uint32_t seed = 7);

}  // namespace hsr
