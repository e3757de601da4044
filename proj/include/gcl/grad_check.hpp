#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gcl {

struct GradCheckRow {
  std::string component;
  double max_rel_err = 0.0;
};

// Compares every analytic gradient against central finite differences on
// random small instances: loss gradients w.r.t. logits, the cosine and dot
// heads, and the full chain through each backbone layer and the input.
// Relative error per group is |analytic - numeric|_inf / max(|numeric|_inf, 1e-12).
// inject_sign_flip corrupts one analytic entry so the harness can prove it
// detects bad gradients.
std::vector<GradCheckRow> run_grad_checks(int trials, std::uint64_t base_seed, double h = 1e-6,
                                          bool inject_sign_flip = false);

}  // namespace gcl
