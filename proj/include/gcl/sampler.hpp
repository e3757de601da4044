#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcl/loss.hpp"
#include "gcl/rng.hpp"
#include "gcl/tensor.hpp"

namespace gcl {

// Batch-construction strategies for classifier re-training.
enum class SamplerStrategy : std::uint8_t {
  instance_balanced = 0,           // IB: class picked proportional to its count
  class_balanced = 1,              // CB: every class equally likely
  effective_number = 2,            // EN: one shared beta
  class_based_effective_number = 3 // CBEN: beta per class from cloud size
};

std::string sampler_strategy_name(SamplerStrategy s);
SamplerStrategy parse_sampler_strategy(const std::string& name);

struct SamplerSpec {
  SamplerStrategy strategy = SamplerStrategy::class_based_effective_number;
  double a = 0.999;        // lower end of the beta range
  double b = 0.0009;       // range width; beta_j lands in [a, a + b]
  double en_beta = 0.999;  // shared beta for the plain EN strategy

  void validate() const;
};

// Per-class selection probabilities. sample_weight is the un-normalized
// per-sample weight (1 - beta_j) / (1 - beta_j^{n_j}), the reciprocal of the
// effective number; rho is the normalized probability of selecting class j,
// proportional to count * sample_weight.
struct ClassProbTable {
  Tensor1 beta;           // empty for IB/CB where no beta is involved
  Tensor1 sample_weight;
  Tensor1 rho;
};

// beta_j = b * (delta_j - delta_min) / (delta_max - delta_min) + a over the
// normalized cloud sizes; all a when the table is flat.
Tensor1 compute_beta(const CloudSizeTable& table, const SamplerSpec& spec);

ClassProbTable compute_rho(const std::vector<std::int64_t>& counts, const Tensor1& beta);

ClassProbTable class_probs(SamplerStrategy strategy, const std::vector<std::int64_t>& counts,
                           const CloudSizeTable& table, const SamplerSpec& spec);

// Each slot independently: class from rho, then a uniform member of that
// class's pool, with replacement.
std::vector<int> draw_batch(RngStream& rng, const ClassProbTable& probs,
                            const std::vector<std::vector<int>>& pools, int batch_size);

std::vector<std::vector<int>> class_pools(const std::vector<int>& labels, int classes);

// Diagnostics export: class, count, beta, rho, empirical frequency.
void write_sampler_csv(const std::string& path, const std::vector<std::int64_t>& counts,
                       const ClassProbTable& probs, const Tensor1& empirical);

}  // namespace gcl
