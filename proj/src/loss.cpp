#include "gcl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "gcl/errors.hpp"
#include "gcl/text.hpp"

namespace gcl {

std::string cloud_strategy_name(CloudStrategy s) {
  switch (s) {
    case CloudStrategy::log_diff: return "log-diff";
    case CloudStrategy::pow_diff: return "pow-diff";
    case CloudStrategy::cosine: return "cosine";
    case CloudStrategy::zero: return "zero";
  }
  return "unknown";
}

CloudStrategy parse_cloud_strategy(const std::string& name) {
  if (name == "log-diff") return CloudStrategy::log_diff;
  if (name == "pow-diff") return CloudStrategy::pow_diff;
  if (name == "cosine") return CloudStrategy::cosine;
  if (name == "zero") return CloudStrategy::zero;
  throw ParseError("unknown cloud-size strategy '" + name + "'");
}

void GclConfig::validate() const {
  if (!(scale > 0.0)) throw DomainError("gcl config: scale must be > 0");
  if (noise_std < 0.0) throw DomainError("gcl config: noise_std must be >= 0");
  if (!(clamp_lo < clamp_hi)) throw DomainError("gcl config: clamp_lo must be < clamp_hi");
  if (strategy == CloudStrategy::pow_diff && !(pow_exponent > 0.0)) {
    throw DomainError("gcl config: pow_exponent must be > 0");
  }
}

CloudSizeTable compute_cloud_sizes(const std::vector<std::int64_t>& counts, CloudStrategy strategy,
                                   double pow_exponent) {
  const int classes = static_cast<int>(counts.size());
  if (classes < 2) throw DomainError("compute_cloud_sizes: need at least 2 classes");
  for (int j = 0; j < classes; ++j) {
    if (counts[j] < 1) {
      throw DomainError("compute_cloud_sizes: class " + std::to_string(j) + " has count < 1");
    }
  }
  const std::int64_t n_max = *std::max_element(counts.begin(), counts.end());
  CloudSizeTable table;
  table.strategy = strategy;
  table.raw = Tensor1(classes);
  for (int j = 0; j < classes; ++j) {
    const double nj = static_cast<double>(counts[j]);
    const double nm = static_cast<double>(n_max);
    double d = 0.0;
    switch (strategy) {
      case CloudStrategy::log_diff:
        d = std::log(nm) - std::log(nj);
        break;
      case CloudStrategy::pow_diff:
        if (!(pow_exponent > 0.0)) throw DomainError("compute_cloud_sizes: pow_exponent must be > 0");
        d = std::pow(nm, pow_exponent) - std::pow(nj, pow_exponent);
        break;
      case CloudStrategy::cosine:
        // cos(pi/2) hits ~6e-17 in doubles; pin the head class to an exact zero.
        d = counts[j] == n_max ? 0.0 : std::cos(nj / nm * std::numbers::pi / 2.0);
        break;
      case CloudStrategy::zero:
        d = 0.0;
        break;
    }
    table.raw[j] = d;
  }
  const double d_max = *std::max_element(table.raw.begin(), table.raw.end());
  table.normalized = Tensor1(classes, 0.0);
  if (d_max > 0.0) {
    for (int j = 0; j < classes; ++j) table.normalized[j] = table.raw[j] / d_max;
  }
  return table;
}

double sample_epsilon(RngStream& rng, const GclConfig& cfg) {
  cfg.validate();
  const double g = rng.next_gaussian(cfg.noise_mean, cfg.noise_std);
  return std::fabs(std::clamp(g, cfg.clamp_lo, cfg.clamp_hi));
}

namespace {

void check_cloud_inputs(const Tensor2& cosine, const CloudSizeTable& table, const Tensor1& eps) {
  if (table.normalized.len() != cosine.cols) {
    throw ShapeError("clouded_logits: table has " + std::to_string(table.normalized.len()) +
                     " classes, logits have " + std::to_string(cosine.cols));
  }
  if (eps.len() != cosine.rows) {
    throw ShapeError("clouded_logits: eps has " + std::to_string(eps.len()) +
                     " entries for a batch of " + std::to_string(cosine.rows));
  }
  for (int i = 0; i < eps.len(); ++i) {
    if (eps[i] < 0.0) throw ContractError("clouded_logits: negative eps at sample " + std::to_string(i));
  }
  for (double z : cosine.data) {
    // Non-finite values fall through to the loss-level divergence check.
    if (std::isfinite(z) && (z < -1.0 - 1e-12 || z > 1.0 + 1e-12)) {
      throw ContractError("clouded_logits: cosine logit out of [-1, 1]");
    }
  }
}

// Shared softmax cross-entropy core. Loss is the batch mean of
// logsumexp(z_i) - z_{i, y_i}; dlogits = (p - target) / batch.
LossOutput softmax_ce(const Tensor2& logits, const std::vector<int>* labels,
                      const Tensor2* soft_labels) {
  const int batch = logits.rows;
  const int classes = logits.cols;
  if (batch < 1) throw ShapeError("loss: empty batch");
  if (labels) {
    if (static_cast<int>(labels->size()) != batch) {
      throw ShapeError("loss: label count does not match batch size");
    }
    for (int i = 0; i < batch; ++i) {
      if ((*labels)[i] < 0 || (*labels)[i] >= classes) {
        throw DomainError("loss: label " + std::to_string((*labels)[i]) +
                          " out of range [0, " + std::to_string(classes) + ")");
      }
    }
  } else {
    if (soft_labels->rows != batch || soft_labels->cols != classes) {
      throw ShapeError("loss: soft label shape mismatch");
    }
  }

  LossOutput out;
  out.probs = Tensor2(batch, classes);
  out.dlogits = Tensor2(batch, classes);
  double total = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (int i = 0; i < batch; ++i) {
    auto zr = logits.row(i);
    double m = zr[0];
    for (int j = 1; j < classes; ++j) m = std::max(m, zr[j]);
    double sum = 0.0;
    for (int j = 0; j < classes; ++j) sum += std::exp(zr[j] - m);
    const double lse = m + std::log(sum);
    for (int j = 0; j < classes; ++j) out.probs.at(i, j) = std::exp(zr[j] - lse);
    if (labels) {
      total += lse - zr[(*labels)[i]];
      for (int j = 0; j < classes; ++j) {
        const double target = j == (*labels)[i] ? 1.0 : 0.0;
        out.dlogits.at(i, j) = (out.probs.at(i, j) - target) * inv_batch;
      }
    } else {
      for (int j = 0; j < classes; ++j) {
        total += soft_labels->at(i, j) * (lse - zr[j]);
        out.dlogits.at(i, j) = (out.probs.at(i, j) - soft_labels->at(i, j)) * inv_batch;
      }
    }
  }
  out.loss = total * inv_batch;
  return out;
}

LossOutput gcl_loss_impl(const Tensor2& cosine, const std::vector<int>* labels,
                         const Tensor2* soft_labels, const CloudSizeTable& table,
                         const Tensor1& eps, const GclConfig& cfg) {
  cfg.validate();
  Tensor2 clouded = clouded_logits(cosine, table, eps, cfg);
  LossOutput out = softmax_ce(clouded, labels, soft_labels);
  // Chain through z_cld = scale * (z - delta * eps): d z_cld / d z = scale.
  for (double& g : out.dlogits.data) g *= cfg.scale;
  return out;
}

}  // namespace

Tensor2 clouded_logits(const Tensor2& cosine, const CloudSizeTable& table, const Tensor1& eps,
                       const GclConfig& cfg) {
  check_cloud_inputs(cosine, table, eps);
  Tensor2 out(cosine.rows, cosine.cols);
  for (int i = 0; i < cosine.rows; ++i) {
    for (int j = 0; j < cosine.cols; ++j) {
      out.at(i, j) = cfg.scale * (cosine.at(i, j) - table.normalized[j] * eps[i]);
    }
  }
  return out;
}

Tensor2 eval_logits(const Tensor2& cosine, const CloudSizeTable& table, const GclConfig& cfg) {
  cfg.validate();
  if (table.normalized.len() != cosine.cols) {
    throw ShapeError("eval_logits: table class count does not match logits");
  }
  Tensor2 out = cosine;
  for (double& z : out.data) z *= cfg.scale;
  return out;
}

LossOutput gcl_loss(const Tensor2& cosine, const std::vector<int>& labels,
                    const CloudSizeTable& table, const Tensor1& eps, const GclConfig& cfg) {
  return gcl_loss_impl(cosine, &labels, nullptr, table, eps, cfg);
}

LossOutput gcl_loss(const Tensor2& cosine, const Tensor2& soft_labels, const CloudSizeTable& table,
                    const Tensor1& eps, const GclConfig& cfg) {
  return gcl_loss_impl(cosine, nullptr, &soft_labels, table, eps, cfg);
}

LossOutput ce_loss(const Tensor2& logits, const std::vector<int>& labels) {
  return softmax_ce(logits, &labels, nullptr);
}

LossOutput ce_loss(const Tensor2& logits, const Tensor2& soft_labels) {
  return softmax_ce(logits, nullptr, &soft_labels);
}

Tensor2 one_hot(const std::vector<int>& labels, int classes) {
  Tensor2 out(static_cast<int>(labels.size()), classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw DomainError("one_hot: label out of range");
    }
    out.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return out;
}

namespace {

double gamma_draw(RngStream& rng, double a) {
  if (a < 1.0) {
    const double u = std::max(rng.next_uniform(), 0x1.0p-53);
    return gamma_draw(rng, a + 1.0) * std::pow(u, 1.0 / a);
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / (3.0 * std::sqrt(d));
  for (;;) {
    const double x = rng.next_gaussian(0.0, 1.0);
    const double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = std::max(rng.next_uniform(), 0x1.0p-53);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

double beta_draw(RngStream& rng, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("beta_draw: alpha must be > 0");
  const double x = gamma_draw(rng, alpha);
  const double y = gamma_draw(rng, alpha);
  return x / (x + y);
}

MixupResult mixup_apply(const Tensor2& x, const Tensor2& onehot_labels,
                        const std::vector<int>& partner, double lambda) {
  if (x.rows != onehot_labels.rows || static_cast<int>(partner.size()) != x.rows) {
    throw ShapeError("mixup: batch/label/pairing sizes differ");
  }
  MixupResult out;
  out.lambda = lambda;
  out.partner = partner;
  out.inputs = Tensor2(x.rows, x.cols);
  out.soft_labels = Tensor2(onehot_labels.rows, onehot_labels.cols);
  for (int i = 0; i < x.rows; ++i) {
    const int p = partner[i];
    for (int j = 0; j < x.cols; ++j) {
      out.inputs.at(i, j) = lambda * x.at(i, j) + (1.0 - lambda) * x.at(p, j);
    }
    for (int j = 0; j < onehot_labels.cols; ++j) {
      out.soft_labels.at(i, j) =
          lambda * onehot_labels.at(i, j) + (1.0 - lambda) * onehot_labels.at(p, j);
    }
  }
  return out;
}

MixupResult mixup_batch(RngStream& rng, const Tensor2& x, const Tensor2& onehot_labels,
                        double alpha) {
  if (!(alpha > 0.0)) throw DomainError("mixup: alpha must be > 0");
  const double lambda = beta_draw(rng, alpha);
  std::vector<int> partner(x.rows);
  std::iota(partner.begin(), partner.end(), 0);
  for (int i = x.rows - 1; i > 0; --i) {
    const int k = static_cast<int>(rng.next_uniform() * (i + 1));
    std::swap(partner[i], partner[k]);
  }
  return mixup_apply(x, onehot_labels, partner, lambda);
}

void write_cloud_csv(const std::string& path, const std::vector<std::int64_t>& counts,
                     const CloudSizeTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "class_index,count,raw_delta,normalized_delta\n";
  for (int j = 0; j < table.raw.len(); ++j) {
    out << j << "," << counts[j] << "," << fmt_g17(table.raw[j]) << ","
        << fmt_g17(table.normalized[j]) << "\n";
  }
}

}  // namespace gcl
