#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcl/rng.hpp"
#include "gcl/tensor.hpp"

namespace gcl {

// How per-class cloud sizes are derived from training counts.
enum class CloudStrategy : std::uint8_t { log_diff = 0, pow_diff = 1, cosine = 2, zero = 3 };

std::string cloud_strategy_name(CloudStrategy s);
CloudStrategy parse_cloud_strategy(const std::string& name);

struct GclConfig {
  double scale = 30.0;        // logit scale s
  double noise_mean = 0.0;    // Gaussian mean of the raw perturbation draw
  double noise_std = 1.0 / 3.0;
  double clamp_lo = -1.0;     // raw draw is clamped here before taking |.|
  double clamp_hi = 1.0;
  CloudStrategy strategy = CloudStrategy::log_diff;
  double pow_exponent = 0.25;  // exponent for the pow_diff strategy

  void validate() const;
};

// Per-class cloud sizes, raw and normalized by the largest value. The most
// frequent class always gets a zero cloud.
struct CloudSizeTable {
  Tensor1 raw;
  Tensor1 normalized;
  CloudStrategy strategy = CloudStrategy::log_diff;
};

CloudSizeTable compute_cloud_sizes(const std::vector<std::int64_t>& counts, CloudStrategy strategy,
                                   double pow_exponent = 0.25);

// Draw the per-sample perturbation magnitude: Gaussian draw, clamp, absolute value.
double sample_epsilon(RngStream& rng, const GclConfig& cfg);

// Entry (i, j) = scale * (z[i, j] - normalized_delta[j] * eps[i]). One shared
// eps per sample across all classes.
Tensor2 clouded_logits(const Tensor2& cosine, const CloudSizeTable& table, const Tensor1& eps,
                       const GclConfig& cfg);

// Inference-path logits: perturbation off, margins removed, just scale * z.
// Argmax is therefore the argmax of the cosine logits.
Tensor2 eval_logits(const Tensor2& cosine, const CloudSizeTable& table, const GclConfig& cfg);

struct LossOutput {
  double loss = 0.0;
  Tensor2 dlogits;  // gradient w.r.t. the un-clouded input logits
  Tensor2 probs;    // softmax over the (clouded) logits
};

// Mean softmax cross-entropy over clouded cosine logits. dlogits is taken
// w.r.t. the cosine logits with eps and delta held constant:
// (scale / batch) * (p - onehot).
LossOutput gcl_loss(const Tensor2& cosine, const std::vector<int>& labels,
                    const CloudSizeTable& table, const Tensor1& eps, const GclConfig& cfg);

// Soft-label variant (row-stochastic targets), used with mixup.
LossOutput gcl_loss(const Tensor2& cosine, const Tensor2& soft_labels, const CloudSizeTable& table,
                    const Tensor1& eps, const GclConfig& cfg);

// Plain softmax cross-entropy baseline on raw logits.
LossOutput ce_loss(const Tensor2& logits, const std::vector<int>& labels);
LossOutput ce_loss(const Tensor2& logits, const Tensor2& soft_labels);

Tensor2 one_hot(const std::vector<int>& labels, int classes);

struct MixupResult {
  Tensor2 inputs;
  Tensor2 soft_labels;
  double lambda = 1.0;
  std::vector<int> partner;  // shuffled pairing used for the mix
};

// Convex combination of the batch with a seeded shuffle of itself; one
// Beta(alpha, alpha) lambda per batch.
MixupResult mixup_batch(RngStream& rng, const Tensor2& x, const Tensor2& onehot_labels,
                        double alpha);

// Deterministic core of mixup, exposed so fixed lambdas can be tested.
MixupResult mixup_apply(const Tensor2& x, const Tensor2& onehot_labels,
                        const std::vector<int>& partner, double lambda);

// Beta(a, a) draw via two gamma draws (Marsaglia-Tsang), deterministic per stream.
double beta_draw(RngStream& rng, double alpha);

// Cloud-size table export: class_index, count, raw_delta, normalized_delta.
void write_cloud_csv(const std::string& path, const std::vector<std::int64_t>& counts,
                     const CloudSizeTable& table);

}  // namespace gcl
