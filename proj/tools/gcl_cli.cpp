// Command-line front end: dataset generation, training, evaluation, gradient
// checking, sampler diagnostics and dataset reports. Every command is a pure
// function of (flags, config, seed); outputs land in one directory per run.
//
// Exit codes: 0 success, 1 internal failure or failed check, 2 user/config error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcl/checkpoint.hpp"
#include "gcl/config_file.hpp"
#include "gcl/data.hpp"
#include "gcl/errors.hpp"
#include "gcl/grad_check.hpp"
#include "gcl/loss.hpp"
#include "gcl/sampler.hpp"
#include "gcl/text.hpp"
#include "gcl/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUserError = 2;

void require_fresh(const std::vector<fs::path>& targets, bool force) {
  if (force) return;
  for (const auto& p : targets) {
    if (fs::exists(p)) {
      throw gcl::DataError("refusing to overwrite existing '" + p.string() +
                           "' (pass --force to allow)");
    }
  }
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  gcl::LongTailSpec tail;
  gcl::BlobSpec blobs;
  int test_per_class = 200;
  std::uint64_t seed = 1;
  std::string out = ".";
  bool force = false;
};

int run_gen_data(const GenDataArgs& args) {
  const auto counts = gcl::longtail_counts(args.tail);
  fs::create_directories(args.out);
  const fs::path train_path = fs::path(args.out) / "train.csv";
  const fs::path test_path = fs::path(args.out) / "test.csv";
  const fs::path summary_path = fs::path(args.out) / "summary.txt";
  require_fresh({train_path, test_path, summary_path}, args.force);

  gcl::RngStream root(args.seed);
  gcl::Dataset train = gcl::synth_blobs(root, args.blobs, counts);
  train.name = "train";
  gcl::Dataset test = gcl::balanced_test_split(root, args.blobs, args.test_per_class);
  test.name = "test";
  gcl::save_csv(train, train_path.string());
  gcl::save_csv(test, test_path.string());

  std::ofstream summary(summary_path, std::ios::binary);
  summary << gcl::dataset_summary(train) << "\n" << gcl::dataset_summary(test);
  std::cout << "wrote " << train_path.string() << " (" << train.size() << " rows), "
            << test_path.string() << " (" << test.size() << " rows)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

int run_train(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed_override, bool force) {
  gcl::RunConfig cfg = gcl::parse_config_file(config_path);
  if (seed_override >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_override);
  cfg.train.validate();
  if (cfg.train_csv.empty() || cfg.test_csv.empty()) {
    throw gcl::DataError("config must set [data] train and test paths");
  }

  const fs::path run_dir(out_dir);
  if (!force && fs::exists(run_dir) && !fs::is_empty(run_dir)) {
    throw gcl::DataError("run directory '" + out_dir + "' already exists (pass --force to reuse)");
  }
  fs::create_directories(run_dir);

  const gcl::Dataset train = gcl::load_csv(cfg.train_csv);
  const gcl::Dataset test = gcl::load_csv(cfg.test_csv);

  {
    std::ofstream snap(run_dir / "config.snapshot", std::ios::binary);
    snap << gcl::render_config(cfg);
  }

  gcl::RngStream root(cfg.train.seed);
  gcl::Model model = gcl::init_model_for(train, cfg.train, root);
  gcl::RngStream s1 = root.child("stage1");
  const gcl::StageResult stage1 = gcl::train_stage1(train, model, cfg.train, s1);
  gcl::write_loss_trace((run_dir / "trace_stage1.csv").string(), stage1.trace);
  gcl::RngStream s2 = root.child("stage2");
  const gcl::StageResult stage2 = gcl::train_stage2_crt(train, model, cfg.train, s2);
  if (!stage2.trace.empty()) {
    gcl::write_loss_trace((run_dir / "trace_stage2.csv").string(), stage2.trace);
  }

  const gcl::EvalReport report = gcl::evaluate(model, cfg.train.loss, test, train.counts, cfg.groups);
  gcl::write_report_csv((run_dir / "report.csv").string(), report);
  {
    std::ofstream txt(run_dir / "report.txt", std::ios::binary);
    txt << gcl::report_table(report);
  }

  const gcl::CloudSizeTable table =
      gcl::compute_cloud_sizes(train.counts, cfg.train.gcl.strategy, cfg.train.gcl.pow_exponent);
  gcl::write_cloud_csv((run_dir / "cloud_sizes.csv").string(), train.counts, table);
  const gcl::ClassProbTable probs =
      gcl::class_probs(cfg.train.sampler.strategy, train.counts, table, cfg.train.sampler);
  gcl::write_sampler_csv((run_dir / "sampler.csv").string(), train.counts, probs, gcl::Tensor1());
  gcl::write_embeddings_csv((run_dir / "embeddings.csv").string(), model, test);

  gcl::Checkpoint ckpt;
  ckpt.model = model;
  ckpt.head = cfg.train.loss == gcl::LossKind::gcl ? gcl::HeadKind::cosine : gcl::HeadKind::dot;
  ckpt.scale = cfg.train.gcl.scale;
  ckpt.train_counts = train.counts;
  ckpt.iteration = static_cast<std::uint64_t>(cfg.train.iters_stage1 + cfg.train.iters_stage2);
  ckpt.config_hash = gcl::config_hash(cfg);
  gcl::save_checkpoint(ckpt, (run_dir / "checkpoint.ckpt").string());

  std::cout << "run complete: top1 " << gcl::fmt_g17(report.top1) << ", artifacts in " << out_dir
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int run_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& out_dir,
             std::int64_t many_gt, std::int64_t few_lt, bool force) {
  const gcl::Checkpoint ckpt = gcl::load_checkpoint(ckpt_path);
  const gcl::Dataset test = gcl::load_csv(data_path);
  gcl::GroupThresholds groups{many_gt, few_lt};
  const gcl::LossKind head =
      ckpt.head == gcl::HeadKind::cosine ? gcl::LossKind::gcl : gcl::LossKind::ce;
  const gcl::EvalReport report = gcl::evaluate(ckpt.model, head, test, ckpt.train_counts, groups);

  fs::create_directories(out_dir);
  const fs::path csv = fs::path(out_dir) / "report.csv";
  const fs::path txt = fs::path(out_dir) / "report.txt";
  require_fresh({csv, txt}, force);
  gcl::write_report_csv(csv.string(), report);
  {
    std::ofstream t(txt, std::ios::binary);
    t << gcl::report_table(report);
  }
  std::cout << gcl::report_table(report);
  return kExitOk;
}

// ---------------------------------------------------------------- grad-check

int run_grad_check(int trials, double tolerance, std::uint64_t seed, bool inject_sign_flip) {
  const auto rows = gcl::run_grad_checks(trials, seed, 1e-6, inject_sign_flip);
  bool ok = true;
  std::printf("%-24s %14s\n", "component", "max rel err");
  for (const auto& row : rows) {
    ok = ok && row.max_rel_err <= tolerance;
    std::printf("%-24s %14.3e %s\n", row.component.c_str(), row.max_rel_err,
                row.max_rel_err <= tolerance ? "ok" : "FAIL");
  }
  std::printf("overall: %s (tolerance %.1e, %d trials)\n", ok ? "PASS" : "FAIL", tolerance, trials);
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- sampler-check

int run_sampler_check(std::vector<std::int64_t> counts, const gcl::LongTailSpec& tail,
                      bool counts_given, std::int64_t draws, double tolerance,
                      std::uint64_t seed) {
  if (!counts_given) counts = gcl::longtail_counts(tail);
  const int classes = static_cast<int>(counts.size());
  const gcl::CloudSizeTable table = gcl::compute_cloud_sizes(counts, gcl::CloudStrategy::log_diff);
  gcl::SamplerSpec spec;

  // Pools of synthetic indices grouped by class.
  std::vector<std::vector<int>> pools(classes);
  int next = 0;
  for (int j = 0; j < classes; ++j) {
    for (std::int64_t k = 0; k < counts[j]; ++k) pools[j].push_back(next++);
  }
  std::vector<int> owner(next);
  for (int j = 0; j < classes; ++j) {
    for (int idx : pools[j]) owner[idx] = j;
  }

  bool ok = true;
  double rarest[4] = {0, 0, 0, 0};
  const gcl::SamplerStrategy strategies[4] = {
      gcl::SamplerStrategy::instance_balanced, gcl::SamplerStrategy::class_balanced,
      gcl::SamplerStrategy::effective_number, gcl::SamplerStrategy::class_based_effective_number};
  int rarest_class = 0;
  for (int j = 1; j < classes; ++j) {
    if (counts[j] < counts[rarest_class]) rarest_class = j;
  }

  for (int s = 0; s < 4; ++s) {
    spec.strategy = strategies[s];
    const gcl::ClassProbTable probs = gcl::class_probs(spec.strategy, counts, table, spec);
    rarest[s] = probs.rho[rarest_class];
    gcl::RngStream rng(seed);
    gcl::RngStream stream = rng.child(gcl::sampler_strategy_name(spec.strategy));
    std::vector<double> freq(classes, 0.0);
    const int chunk = 65536;
    std::int64_t remaining = draws;
    while (remaining > 0) {
      const int take = static_cast<int>(std::min<std::int64_t>(chunk, remaining));
      for (int idx : gcl::draw_batch(stream, probs, pools, take)) freq[owner[idx]] += 1.0;
      remaining -= take;
    }
    double max_dev = 0.0;
    for (int j = 0; j < classes; ++j) {
      freq[j] /= static_cast<double>(draws);
      max_dev = std::max(max_dev, std::fabs(freq[j] - probs.rho[j]));
    }
    ok = ok && max_dev <= tolerance;
    std::printf("%-5s max |empirical - rho| = %.5f %s\n", gcl::sampler_strategy_name(spec.strategy).c_str(),
                max_dev, max_dev <= tolerance ? "ok" : "FAIL");
    std::printf("      class rho:");
    for (int j = 0; j < classes; ++j) std::printf(" %.5f", probs.rho[j]);
    std::printf("\n      empirical:");
    for (int j = 0; j < classes; ++j) std::printf(" %.5f", freq[j]);
    std::printf("\n");
  }

  const bool ordered = rarest[0] < rarest[3] && rarest[3] < rarest[1];
  std::printf("rarest class %d selection probability: IB %.5f < CBEN %.5f < CB %.5f : %s\n",
              rarest_class, rarest[0], rarest[3], rarest[1], ordered ? "ok" : "FAIL");
  ok = ok && ordered;
  std::printf("overall: %s (tolerance %.3f, %lld draws)\n", ok ? "PASS" : "FAIL", tolerance,
              static_cast<long long>(draws));
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- report

int run_report(const std::string& data_path, const std::string& out_dir,
               const std::string& strategy, double pow_exponent, const std::string& sampler,
               std::uint64_t seed, bool force) {
  const gcl::Dataset ds = gcl::load_csv(data_path);
  fs::create_directories(out_dir);
  const fs::path summary_path = fs::path(out_dir) / "summary.txt";
  const fs::path cloud_path = fs::path(out_dir) / "cloud_sizes.csv";
  const fs::path sampler_path = fs::path(out_dir) / "sampler.csv";
  require_fresh({summary_path, cloud_path, sampler_path}, force);

  const gcl::CloudSizeTable table =
      gcl::compute_cloud_sizes(ds.counts, gcl::parse_cloud_strategy(strategy), pow_exponent);
  gcl::write_cloud_csv(cloud_path.string(), ds.counts, table);

  gcl::SamplerSpec spec;
  spec.strategy = gcl::parse_sampler_strategy(sampler);
  const gcl::ClassProbTable probs = gcl::class_probs(spec.strategy, ds.counts, table, spec);
  const auto pools = gcl::class_pools(ds.labels, ds.classes());
  gcl::RngStream rng(seed);
  gcl::RngStream stream = rng.child("report");
  gcl::Tensor1 freq(ds.classes(), 0.0);
  const int draws = 100000;
  for (int idx : gcl::draw_batch(stream, probs, pools, draws)) {
    freq[ds.labels[idx]] += 1.0 / draws;
  }
  gcl::write_sampler_csv(sampler_path.string(), ds.counts, probs, freq);

  std::ofstream summary(summary_path, std::ios::binary);
  summary << gcl::dataset_summary(ds);
  std::cout << gcl::dataset_summary(ds);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian clouded logit training toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a long-tailed blob dataset as CSV");
  gen_cmd->add_option("--classes", gen.tail.classes, "number of classes")->capture_default_str();
  gen_cmd->add_option("--head", gen.tail.head, "head class training count")->capture_default_str();
  gen_cmd->add_option("--gamma", gen.tail.gamma, "imbalance ratio")->capture_default_str();
  gen_cmd->add_option("--dim", gen.blobs.dim, "feature dimension")->capture_default_str();
  gen_cmd->add_option("--center-scale", gen.blobs.center_scale, "stddev of class centers")
      ->capture_default_str();
  gen_cmd->add_option("--noise-std", gen.blobs.noise_std, "per-sample noise stddev")
      ->capture_default_str();
  gen_cmd->add_option("--test-per-class", gen.test_per_class, "balanced test samples per class")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "root seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->capture_default_str();
  gen_cmd->add_flag("--force", gen.force, "overwrite existing files");

  std::string train_config;
  std::string train_out = "run";
  std::int64_t train_seed = -1;
  bool train_force = false;
  auto* train_cmd = app.add_subcommand("train", "run the two-stage training procedure");
  train_cmd->add_option("--config", train_config, "config file path")->required();
  train_cmd->add_option("--out", train_out, "run directory")->capture_default_str();
  train_cmd->add_option("--seed", train_seed, "override the config seed");
  train_cmd->add_flag("--force", train_force, "reuse an existing run directory");

  std::string eval_ckpt;
  std::string eval_data;
  std::string eval_out = "eval";
  std::int64_t eval_many = 100;
  std::int64_t eval_few = 20;
  bool eval_force = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a CSV dataset");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "test CSV path")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->capture_default_str();
  eval_cmd->add_option("--many-gt", eval_many, "'many' group: training count above this");
  eval_cmd->add_option("--few-lt", eval_few, "'few' group: training count below this");
  eval_cmd->add_flag("--force", eval_force, "overwrite existing report files");

  int gc_trials = 20;
  double gc_tol = 1e-5;
  std::uint64_t gc_seed = 20240;
  bool gc_flip = false;
  auto* gc_cmd = app.add_subcommand("grad-check", "compare analytic gradients to finite differences");
  gc_cmd->add_option("--seeds", gc_trials, "number of random instances")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tol, "max acceptable relative error")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "base seed")->capture_default_str();
  gc_cmd->add_flag("--inject-sign-flip", gc_flip,
                   "test hook: corrupt one gradient to prove detection");

  std::string sc_counts;
  gcl::LongTailSpec sc_tail{500, 10, 100.0};
  std::int64_t sc_draws = 1000000;
  double sc_tol = 0.005;
  std::uint64_t sc_seed = 7;
  auto* sc_cmd = app.add_subcommand("sampler-check", "empirical vs analytic class probabilities");
  sc_cmd->add_option("--counts", sc_counts, "explicit per-class counts, comma separated");
  sc_cmd->add_option("--classes", sc_tail.classes, "profile class count")->capture_default_str();
  sc_cmd->add_option("--head", sc_tail.head, "profile head count")->capture_default_str();
  sc_cmd->add_option("--gamma", sc_tail.gamma, "profile imbalance ratio")->capture_default_str();
  sc_cmd->add_option("--draws", sc_draws, "Monte-Carlo draw count")->capture_default_str();
  sc_cmd->add_option("--tolerance", sc_tol, "max absolute per-class deviation")->capture_default_str();
  sc_cmd->add_option("--seed", sc_seed, "stream seed")->capture_default_str();

  std::string rp_data;
  std::string rp_out = "report";
  std::string rp_strategy = "log-diff";
  double rp_pow = 0.25;
  std::string rp_sampler = "CBEN";
  std::uint64_t rp_seed = 7;
  bool rp_force = false;
  auto* rp_cmd = app.add_subcommand("report", "dataset summary, cloud sizes and sampler table");
  rp_cmd->add_option("--data", rp_data, "training CSV path")->required();
  rp_cmd->add_option("--out", rp_out, "output directory")->capture_default_str();
  rp_cmd->add_option("--strategy", rp_strategy, "cloud-size strategy")->capture_default_str();
  rp_cmd->add_option("--pow-exponent", rp_pow, "exponent for pow-diff")->capture_default_str();
  rp_cmd->add_option("--sampler", rp_sampler, "sampler strategy")->capture_default_str();
  rp_cmd->add_option("--seed", rp_seed, "stream seed")->capture_default_str();
  rp_cmd->add_flag("--force", rp_force, "overwrite existing files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUserError;
  }

  try {
    if (gen_cmd->parsed()) {
      gen.blobs.classes = gen.tail.classes;
      return run_gen_data(gen);
    }
    if (train_cmd->parsed()) return run_train(train_config, train_out, train_seed, train_force);
    if (eval_cmd->parsed()) {
      return run_eval(eval_ckpt, eval_data, eval_out, eval_many, eval_few, eval_force);
    }
    if (gc_cmd->parsed()) return run_grad_check(gc_trials, gc_tol, gc_seed, gc_flip);
    if (sc_cmd->parsed()) {
      std::vector<std::int64_t> counts;
      if (!sc_counts.empty()) {
        for (const auto& cell : gcl::split(sc_counts, ',')) {
          counts.push_back(std::stoll(std::string(gcl::trim(cell))));
        }
      }
      return run_sampler_check(counts, sc_tail, !sc_counts.empty(), sc_draws, sc_tol, sc_seed);
    }
    if (rp_cmd->parsed()) {
      return run_report(rp_data, rp_out, rp_strategy, rp_pow, rp_sampler, rp_seed, rp_force);
    }
  } catch (const gcl::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const gcl::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const gcl::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUserError;
}
