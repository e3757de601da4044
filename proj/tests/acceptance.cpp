// Acceptance suite: one line per criterion, exit code = number of failures.
// Every tolerance is pinned in code; runtimes are reported per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gcl/data.hpp"
#include "gcl/grad_check.hpp"
#include "gcl/loss.hpp"
#include "gcl/rng.hpp"
#include "gcl/sampler.hpp"
#include "gcl/trainer.hpp"

using namespace gcl;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
  double time_limit_sec = 0.0;  // 0 = no runtime bound
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ------------------------------------------------------------------ criteria

bool gradient_suite(std::string& detail) {
  const double tol = 1e-5;
  const auto rows = run_grad_checks(24, 20240, 1e-6);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& row : rows) {
    if (row.max_rel_err > worst) {
      worst = row.max_rel_err;
      worst_name = row.component;
    }
  }
  std::ostringstream out;
  out << rows.size() << " components over 24 instances, worst " << worst_name << " rel err "
      << worst << " (tol " << tol << ")";
  detail = out.str();
  return worst <= tol;
}

bool reduction_equivalence(std::string& detail) {
  RngStream rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = 2 + static_cast<int>(rng.next_uniform() * 8);
    const int batch = 1 + static_cast<int>(rng.next_uniform() * 15);
    const CloudSizeTable table =
        compute_cloud_sizes(std::vector<std::int64_t>(classes, 25), CloudStrategy::log_diff);
    GclConfig cfg;
    cfg.scale = 0.5 + rng.next_uniform() * 40.0;
    Tensor2 z(batch, classes);
    for (double& v : z.data) v = rng.next_uniform() * 2.0 - 1.0;
    std::vector<int> y(batch);
    for (int i = 0; i < batch; ++i) y[i] = static_cast<int>(rng.next_uniform() * classes);
    const double a = gcl_loss(z, y, table, Tensor1(batch, 0.0), cfg).loss;
    Tensor2 scaled = z;
    for (double& v : scaled.data) v *= cfg.scale;
    const double b = ce_loss(scaled, y).loss;
    worst = std::max(worst, std::fabs(a - b));
  }
  std::ostringstream out;
  out << "max |gcl - ce| = " << worst << " over 100 random batches (tol 1e-12)";
  detail = out.str();
  return worst <= 1e-12;
}

bool cloud_size_oracle(std::string& detail) {
  bool ok = true;
  const CloudSizeTable t = compute_cloud_sizes({5000, 500, 50}, CloudStrategy::log_diff);
  ok = ok && std::fabs(t.normalized[0] - 0.0) <= 1e-12;
  ok = ok && std::fabs(t.normalized[1] - 0.5) <= 1e-12;
  ok = ok && std::fabs(t.normalized[2] - 1.0) <= 1e-12;

  RngStream rng(12);
  for (int trial = 0; trial < 25 && ok; ++trial) {
    const int classes = 2 + static_cast<int>(rng.next_uniform() * 12);
    std::vector<std::int64_t> counts(classes);
    for (auto& c : counts) c = 1 + static_cast<std::int64_t>(rng.next_uniform() * 4000);
    std::sort(counts.begin(), counts.end(), std::greater<>());
    for (auto strategy : {CloudStrategy::log_diff, CloudStrategy::pow_diff, CloudStrategy::cosine,
                          CloudStrategy::zero}) {
      const CloudSizeTable table = compute_cloud_sizes(counts, strategy, 0.25);
      ok = ok && table.raw[0] == 0.0;  // most frequent class
      for (int j = 0; j + 1 < classes; ++j) {
        ok = ok && table.raw[j] <= table.raw[j + 1] + 1e-15;
      }
    }
  }
  detail = "log-diff [5000,500,50] -> [0, 0.5, 1]; head zero + monotone across 4 strategies";
  return ok;
}

bool sampler_statistics(std::string& detail) {
  const auto counts = longtail_counts(LongTailSpec{500, 10, 100.0});
  const CloudSizeTable table = compute_cloud_sizes(counts, CloudStrategy::log_diff);
  SamplerSpec spec;
  const ClassProbTable ib =
      class_probs(SamplerStrategy::instance_balanced, counts, table, spec);
  const ClassProbTable cb = class_probs(SamplerStrategy::class_balanced, counts, table, spec);
  const ClassProbTable cben =
      class_probs(SamplerStrategy::class_based_effective_number, counts, table, spec);
  const bool ordered = ib.rho[9] < cben.rho[9] && cben.rho[9] < cb.rho[9];

  std::vector<std::vector<int>> pools(10);
  int next = 0;
  std::vector<int> owner;
  for (int j = 0; j < 10; ++j) {
    for (std::int64_t k = 0; k < counts[j]; ++k) {
      pools[j].push_back(next++);
      owner.push_back(j);
    }
  }
  RngStream rng(314159);
  std::vector<double> freq(10, 0.0);
  const int draws = 1000000;
  int remaining = draws;
  while (remaining > 0) {
    const int take = std::min(65536, remaining);
    for (int idx : draw_batch(rng, cben, pools, take)) freq[owner[idx]] += 1.0;
    remaining -= take;
  }
  double max_dev = 0.0;
  for (int j = 0; j < 10; ++j) max_dev = std::max(max_dev, std::fabs(freq[j] / draws - cben.rho[j]));

  std::ostringstream out;
  out << "rarest class: IB " << ib.rho[9] << " < CBEN " << cben.rho[9] << " < CB " << cb.rho[9]
      << (ordered ? " ok" : " VIOLATED") << "; Monte-Carlo max dev " << max_dev
      << " at 1e6 draws (tol 0.005)";
  detail = out.str();
  return ordered && max_dev <= 0.005;
}

bool gap_check(std::string& detail) {
  RngStream rng(777);
  CloudSizeTable table;
  table.raw = Tensor1{0.0, 0.35, 0.8, 1.0};
  table.normalized = table.raw;
  GclConfig cfg;
  cfg.scale = 30.0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor2 z(3, 4);
    for (double& v : z.data) v = rng.next_uniform() * 2.0 - 1.0;
    Tensor1 eps(3);
    for (int i = 0; i < 3; ++i) eps[i] = rng.next_uniform();
    const Tensor2 clouded = clouded_logits(z, table, eps, cfg);
    const int y = trial % 4;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double gap_clouded = clouded.at(i, y) - clouded.at(i, j);
        const double gap_plain = cfg.scale * (z.at(i, y) - z.at(i, j));
        const double expected = cfg.scale * eps[i] * (table.normalized[j] - table.normalized[y]);
        worst = std::max(worst, std::fabs(gap_clouded - gap_plain - expected));
      }
    }
  }
  std::ostringstream out;
  out << "max |gap shift - s*eps*(delta_j - delta_y)| = " << worst << " (tol 1e-12)";
  detail = out.str();
  return worst <= 1e-12;
}

// Pinned desk-scale experiment configuration.
TrainConfig experiment_config(LossKind loss, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.iters_stage1 = 3000;
  cfg.iters_stage2 = loss == LossKind::gcl ? 500 : 0;
  cfg.batch_size = 64;
  cfg.lr = 0.1;
  cfg.momentum = 0.9;
  cfg.hidden_dims = {64, 64};
  cfg.embed_dim = 16;
  cfg.seed = seed;
  cfg.loss = loss;
  cfg.gcl.scale = 30.0;
  return cfg;
}

ExperimentSpec experiment_spec(std::uint64_t data_seed) {
  ExperimentSpec spec;
  spec.tail = {500, 10, 100.0};
  spec.blobs = {10, 32, 0.4, 1.0};  // noise/center ratio 2.5: overlapping but learnable
  spec.test_per_class = 200;
  spec.data_seed = data_seed;
  return spec;
}

struct PairedOutcome {
  std::vector<double> few_delta;
  std::vector<double> top1_delta;
  std::vector<double> stage1_few_delta;
};

PairedOutcome g_paired;  // filled by the paired experiment, reused by the ablation echo

bool paired_experiment(std::string& detail) {
  std::vector<double> ce_few, gcl_few, ce_top1, gcl_top1;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ExperimentResult r = run_experiment(experiment_config(LossKind::ce, seed),
                                              experiment_config(LossKind::gcl, seed),
                                              experiment_spec(900 + seed));
    ce_few.push_back(r.baseline.few_acc);
    gcl_few.push_back(r.treatment_final.few_acc);
    ce_top1.push_back(r.baseline.top1);
    gcl_top1.push_back(r.treatment_final.top1);
    g_paired.few_delta.push_back(r.treatment_final.few_acc - r.baseline.few_acc);
    g_paired.top1_delta.push_back(r.treatment_final.top1 - r.baseline.top1);
    g_paired.stage1_few_delta.push_back(r.treatment_stage1.few_acc - r.baseline.few_acc);
  }
  const double few_gap = median(gcl_few) - median(ce_few);
  const double top1_gap = median(gcl_top1) - median(ce_top1);
  std::ostringstream out;
  out << "median few-group: GCL+CBEN+cRT " << median(gcl_few) << " vs CE " << median(ce_few)
      << " (gap " << few_gap << ", need >= 0.10); median top-1: " << median(gcl_top1) << " vs "
      << median(ce_top1) << " (gap " << top1_gap << ", need >= 0.03)";
  detail = out.str();
  return few_gap >= 0.10 && top1_gap >= 0.03;
}

bool ablation_echo(std::string& detail) {
  // Stage-1-only comparison over the same five paired runs.
  if (g_paired.stage1_few_delta.empty()) {
    detail = "paired experiment produced no runs";
    return false;
  }
  const double gap = median(g_paired.stage1_few_delta);
  std::ostringstream out;
  out << "median few-group gap of GCL stage-1-only over CE stage-1-only: " << gap << " (need > 0)";
  detail = out.str();
  return gap > 0.0;
}

bool determinism(std::string& detail) {
  const fs::path dir_a = fs::temp_directory_path() / "gcl_accept_det_a";
  const fs::path dir_b = fs::temp_directory_path() / "gcl_accept_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_experiment(experiment_config(LossKind::ce, 1), experiment_config(LossKind::gcl, 1),
                 experiment_spec(901), dir_a.string());
  run_experiment(experiment_config(LossKind::ce, 1), experiment_config(LossKind::gcl, 1),
                 experiment_spec(901), dir_b.string());
  bool ok = true;
  for (const char* name :
       {"report_baseline.csv", "report_treatment_stage1.csv", "report_treatment.csv",
        "trace_baseline_stage1.csv", "trace_treatment_stage1.csv", "trace_treatment_stage2.csv",
        "cloud_sizes.csv", "sampler.csv", "embeddings.csv", "summary.txt"}) {
    ok = ok && slurp(dir_a / name) == slurp(dir_b / name);
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  detail = "two identically seeded experiment runs produce byte-identical reports and artifacts";
  return ok;
}

bool freeze_contract(std::string& detail) {
  const ExperimentSpec spec = experiment_spec(902);
  const auto counts = longtail_counts(spec.tail);
  RngStream data_root(spec.data_seed);
  const Dataset train = synth_blobs(data_root, spec.blobs, counts);
  TrainConfig cfg = experiment_config(LossKind::gcl, 1);
  cfg.iters_stage1 = 300;
  cfg.iters_stage2 = 200;
  RngStream root(cfg.seed);
  Model model = init_model_for(train, cfg, root);
  RngStream s1 = root.child("stage1");
  train_stage1(train, model, cfg, s1);
  std::vector<std::vector<double>> before;
  for (const auto& layer : model.backbone.layers) {
    before.push_back(layer.weight.data);
    before.push_back(layer.bias.data);
  }
  RngStream s2 = root.child("stage2");
  train_stage2_crt(train, model, cfg, s2);
  bool ok = true;
  std::size_t k = 0;
  for (const auto& layer : model.backbone.layers) {
    ok = ok && layer.weight.data == before[k++];
    ok = ok && layer.bias.data == before[k++];
  }
  detail = "stage-2 backbone parameters byte-identical to the stage-1 output";
  return ok;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"gradient-suite", gradient_suite, 30.0},
      {"reduction-equivalence", reduction_equivalence},
      {"cloud-size-oracle", cloud_size_oracle},
      {"sampler-statistics", sampler_statistics, 10.0},
      {"gap-check", gap_check},
      {"paired-experiment", paired_experiment, 300.0},
      {"ablation-echo", ablation_echo},
      {"determinism", determinism},
      {"freeze-contract", freeze_contract},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && criterion.time_limit_sec > 0.0 && secs > criterion.time_limit_sec) {
      ok = false;
      detail += " [over the " + std::to_string(criterion.time_limit_sec) + "s budget]";
    }
    std::printf("[%s] %-22s %s (%.1fs)\n", ok ? "PASS" : "FAIL", criterion.name.c_str(),
                detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures;
}
