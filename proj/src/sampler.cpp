#include "gcl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gcl/errors.hpp"
#include "gcl/text.hpp"

namespace gcl {

std::string sampler_strategy_name(SamplerStrategy s) {
  switch (s) {
    case SamplerStrategy::instance_balanced: return "IB";
    case SamplerStrategy::class_balanced: return "CB";
    case SamplerStrategy::effective_number: return "EN";
    case SamplerStrategy::class_based_effective_number: return "CBEN";
  }
  return "unknown";
}

SamplerStrategy parse_sampler_strategy(const std::string& name) {
  if (name == "IB") return SamplerStrategy::instance_balanced;
  if (name == "CB") return SamplerStrategy::class_balanced;
  if (name == "EN") return SamplerStrategy::effective_number;
  if (name == "CBEN") return SamplerStrategy::class_based_effective_number;
  throw ParseError("unknown sampler strategy '" + name + "'");
}

void SamplerSpec::validate() const {
  if (!(a > 0.0 && b > 0.0 && a + b < 1.0)) {
    throw DomainError("sampler spec: need 0 < a < a + b < 1");
  }
  if (!(en_beta > 0.0 && en_beta < 1.0)) {
    throw DomainError("sampler spec: en_beta must be in (0, 1)");
  }
}

Tensor1 compute_beta(const CloudSizeTable& table, const SamplerSpec& spec) {
  spec.validate();
  const int classes = table.normalized.len();
  if (classes < 2) throw DomainError("compute_beta: need at least 2 classes");
  const double d_min = *std::min_element(table.normalized.begin(), table.normalized.end());
  const double d_max = *std::max_element(table.normalized.begin(), table.normalized.end());
  Tensor1 beta(classes, spec.a);
  if (d_max > d_min) {
    for (int j = 0; j < classes; ++j) {
      beta[j] = spec.b * (table.normalized[j] - d_min) / (d_max - d_min) + spec.a;
    }
  }
  return beta;
}

ClassProbTable compute_rho(const std::vector<std::int64_t>& counts, const Tensor1& beta) {
  const int classes = static_cast<int>(counts.size());
  if (beta.len() != classes) throw ShapeError("compute_rho: beta/count lengths differ");
  ClassProbTable table;
  table.beta = beta;
  table.sample_weight = Tensor1(classes);
  table.rho = Tensor1(classes);
  double total = 0.0;
  for (int j = 0; j < classes; ++j) {
    if (counts[j] < 1) throw DomainError("compute_rho: class " + std::to_string(j) + " has count < 1");
    if (!(beta[j] > 0.0 && beta[j] < 1.0)) {
      throw DomainError("compute_rho: beta must be in (0, 1), got " + fmt_g17(beta[j]));
    }
    // Reciprocal of the effective number (1 - beta^n) / (1 - beta).
    const double effective = (1.0 - std::pow(beta[j], static_cast<double>(counts[j]))) /
                             (1.0 - beta[j]);
    table.sample_weight[j] = 1.0 / effective;
    table.rho[j] = static_cast<double>(counts[j]) * table.sample_weight[j];
    total += table.rho[j];
  }
  for (int j = 0; j < classes; ++j) table.rho[j] /= total;
  return table;
}

ClassProbTable class_probs(SamplerStrategy strategy, const std::vector<std::int64_t>& counts,
                           const CloudSizeTable& table, const SamplerSpec& spec) {
  const int classes = static_cast<int>(counts.size());
  if (classes < 2) throw DomainError("class_probs: need at least 2 classes");
  for (int j = 0; j < classes; ++j) {
    if (counts[j] < 1) throw DomainError("class_probs: class " + std::to_string(j) + " has count < 1");
  }
  switch (strategy) {
    case SamplerStrategy::instance_balanced: {
      ClassProbTable t;
      t.rho = Tensor1(classes);
      double total = 0.0;
      for (int j = 0; j < classes; ++j) total += static_cast<double>(counts[j]);
      for (int j = 0; j < classes; ++j) t.rho[j] = static_cast<double>(counts[j]) / total;
      return t;
    }
    case SamplerStrategy::class_balanced: {
      ClassProbTable t;
      t.rho = Tensor1(classes, 1.0 / static_cast<double>(classes));
      return t;
    }
    case SamplerStrategy::effective_number: {
      spec.validate();
      return compute_rho(counts, Tensor1(classes, spec.en_beta));
    }
    case SamplerStrategy::class_based_effective_number:
      return compute_rho(counts, compute_beta(table, spec));
  }
  throw DomainError("class_probs: unknown strategy");
}

std::vector<std::vector<int>> class_pools(const std::vector<int>& labels, int classes) {
  std::vector<std::vector<int>> pools(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw DataError("class_pools: label out of range");
    pools[labels[i]].push_back(static_cast<int>(i));
  }
  return pools;
}

std::vector<int> draw_batch(RngStream& rng, const ClassProbTable& probs,
                            const std::vector<std::vector<int>>& pools, int batch_size) {
  const int classes = probs.rho.len();
  if (static_cast<int>(pools.size()) != classes) {
    throw ShapeError("draw_batch: pool count does not match class count");
  }
  if (batch_size < 1) throw DomainError("draw_batch: batch_size must be >= 1");
  std::vector<double> cum(classes);
  double run = 0.0;
  for (int j = 0; j < classes; ++j) {
    if (probs.rho[j] > 0.0 && pools[j].empty()) {
      throw DataError("draw_batch: class " + std::to_string(j) +
                      " has positive probability but an empty pool");
    }
    run += probs.rho[j];
    cum[j] = run;
  }
  cum[classes - 1] = run;  // guard against the cumulative sum falling short of 1

  std::vector<int> out(batch_size);
  for (int s = 0; s < batch_size; ++s) {
    const double u = rng.next_uniform() * run;
    int cls = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    while (cls < classes && pools[cls].empty()) ++cls;  // only reachable on zero-prob boundary
    if (cls >= classes) cls = classes - 1;
    const auto& pool = pools[cls];
    const std::size_t pick = static_cast<std::size_t>(rng.next_uniform() * pool.size());
    out[s] = pool[std::min(pick, pool.size() - 1)];
  }
  return out;
}

void write_sampler_csv(const std::string& path, const std::vector<std::int64_t>& counts,
                       const ClassProbTable& probs, const Tensor1& empirical) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "class,count,beta,rho,empirical_frequency\n";
  for (int j = 0; j < probs.rho.len(); ++j) {
    out << j << "," << counts[j] << ",";
    if (probs.beta.len() == probs.rho.len()) out << fmt_g17(probs.beta[j]);
    out << "," << fmt_g17(probs.rho[j]) << ",";
    if (empirical.len() == probs.rho.len()) out << fmt_g17(empirical[j]);
    out << "\n";
  }
}

}  // namespace gcl
