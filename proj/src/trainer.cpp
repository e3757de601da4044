#include "gcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "gcl/checkpoint.hpp"
#include "gcl/errors.hpp"
#include "gcl/optim.hpp"
#include "gcl/text.hpp"

namespace gcl {

std::string loss_kind_name(LossKind k) { return k == LossKind::gcl ? "gcl" : "ce"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "gcl") return LossKind::gcl;
  if (name == "ce") return LossKind::ce;
  throw ParseError("unknown loss '" + name + "' (expected gcl or ce)");
}

void TrainConfig::validate() const {
  if (iters_stage1 < 0 || iters_stage2 < 0) throw DomainError("config: iteration counts must be >= 0");
  if (batch_size < 1) throw DomainError("config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw DomainError("config: lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw DomainError("config: momentum must be in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw DomainError("config: lr_decay must be in (0, 1]");
  for (double f : milestone_fracs) {
    if (!(f > 0.0 && f < 1.0)) throw DomainError("config: milestone fractions must be in (0, 1)");
  }
  if (mixup && !(mixup_alpha > 0.0)) throw DomainError("config: mixup_alpha must be > 0");
  if (embed_dim < 1) throw DomainError("config: embed_dim must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw DomainError("config: hidden dims must be >= 1");
  }
  gcl.validate();
  sampler.validate();
}

Model init_model_for(const Dataset& train, const TrainConfig& cfg, RngStream& rng) {
  cfg.validate();
  RngStream init = rng.child("init");
  return init_model(train.dim(), cfg.hidden_dims, cfg.embed_dim, train.classes(), init);
}

namespace {

double lr_at(std::int64_t iter, std::int64_t total, const TrainConfig& cfg) {
  double lr = cfg.lr;
  for (double frac : cfg.milestone_fracs) {
    if (iter >= std::llround(frac * static_cast<double>(total))) lr *= cfg.lr_decay;
  }
  return lr;
}

Tensor2 gather_rows(const Tensor2& src, const std::vector<int>& idx) {
  Tensor2 out(static_cast<int>(idx.size()), src.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto s = src.row(idx[i]);
    auto d = out.row(static_cast<int>(i));
    std::copy(s.begin(), s.end(), d.begin());
  }
  return out;
}

struct BatchLoss {
  LossOutput out;
  ForwardTape tape;
};

// One forward/loss evaluation for a batch; shared by both stages.
BatchLoss batch_loss(const Model& model, const TrainConfig& cfg, const CloudSizeTable& table,
                     const Tensor2& x, const std::vector<int>& labels, int classes,
                     RngStream& noise_rng, RngStream& mix_rng) {
  Tensor2 inputs = x;
  Tensor2 soft;
  const bool use_soft = cfg.mixup;
  if (use_soft) {
    MixupResult mixed = mixup_batch(mix_rng, x, one_hot(labels, classes), cfg.mixup_alpha);
    inputs = std::move(mixed.inputs);
    soft = std::move(mixed.soft_labels);
  }
  BatchLoss result;
  auto [f, tape] = forward_features(model.backbone, inputs);
  result.tape = std::move(tape);
  if (cfg.loss == LossKind::gcl) {
    Tensor2 cosz = cosine_logits(model.classifier, f, result.tape);
    Tensor1 eps(static_cast<int>(labels.size()));
    for (int i = 0; i < eps.len(); ++i) eps[i] = sample_epsilon(noise_rng, cfg.gcl);
    result.out = use_soft ? gcl_loss(cosz, soft, table, eps, cfg.gcl)
                          : gcl_loss(cosz, labels, table, eps, cfg.gcl);
  } else {
    Tensor2 z = dot_logits(model.classifier, f, result.tape);
    result.out = use_soft ? ce_loss(z, soft) : ce_loss(z, labels);
  }
  return result;
}

}  // namespace

StageResult train_stage1(const Dataset& train, Model& model, const TrainConfig& cfg,
                         RngStream& rng) {
  cfg.validate();
  validate_dataset(train);
  StageResult result;
  if (cfg.iters_stage1 == 0) return result;

  const CloudSizeTable table =
      compute_cloud_sizes(train.counts, cfg.gcl.strategy, cfg.gcl.pow_exponent);
  RngStream batch_rng = rng.child("batch");
  RngStream noise_rng = rng.child("noise");
  RngStream mix_rng = rng.child("mixup");
  SgdState opt(cfg.lr, cfg.momentum, param_shapes(model));
  const int total = train.size();

  for (std::int64_t it = 0; it < cfg.iters_stage1; ++it) {
    opt.lr = lr_at(it, cfg.iters_stage1, cfg);
    std::vector<int> idx(cfg.batch_size);
    std::vector<int> labels(cfg.batch_size);
    for (int s = 0; s < cfg.batch_size; ++s) {
      idx[s] = static_cast<int>(batch_rng.next_uniform() * total);
      labels[s] = train.labels[idx[s]];
    }
    Tensor2 x = gather_rows(train.features, idx);
    BatchLoss bl = batch_loss(model, cfg, table, x, labels, train.classes(), noise_rng, mix_rng);
    if (!std::isfinite(bl.out.loss)) {
      throw DivergenceError("non-finite loss at stage-1 iteration " + std::to_string(it));
    }
    ModelGrads grads = backward(model.backbone, model.classifier, bl.tape, bl.out.dlogits);
    sgd_step(param_spans(model), grad_spans(grads), opt);
    result.trace.push_back({it, opt.lr, bl.out.loss});
  }
  return result;
}

StageResult train_stage2_crt(const Dataset& train, Model& model, const TrainConfig& cfg,
                             RngStream& rng) {
  cfg.validate();
  validate_dataset(train);
  StageResult result;
  if (cfg.iters_stage2 == 0) return result;

  const CloudSizeTable table =
      compute_cloud_sizes(train.counts, cfg.gcl.strategy, cfg.gcl.pow_exponent);
  const ClassProbTable probs = class_probs(cfg.sampler.strategy, train.counts, table, cfg.sampler);
  const auto pools = class_pools(train.labels, train.classes());
  RngStream batch_rng = rng.child("batch");
  RngStream noise_rng = rng.child("noise");
  RngStream mix_rng = rng.child("mixup");
  SgdState opt(cfg.lr, cfg.momentum, {model.classifier.weight.data.size()});

  for (std::int64_t it = 0; it < cfg.iters_stage2; ++it) {
    opt.lr = lr_at(it, cfg.iters_stage2, cfg);
    const std::vector<int> idx = draw_batch(batch_rng, probs, pools, cfg.batch_size);
    std::vector<int> labels(idx.size());
    for (std::size_t s = 0; s < idx.size(); ++s) labels[s] = train.labels[idx[s]];
    Tensor2 x = gather_rows(train.features, idx);
    BatchLoss bl = batch_loss(model, cfg, table, x, labels, train.classes(), noise_rng, mix_rng);
    if (!std::isfinite(bl.out.loss)) {
      throw DivergenceError("non-finite loss at stage-2 iteration " + std::to_string(it));
    }
    ModelGrads grads = backward(model.backbone, model.classifier, bl.tape, bl.out.dlogits);
    // Representation frozen: only the classifier weights move.
    sgd_step({std::span<double>(model.classifier.weight.data)},
             {std::span<const double>(grads.clf_weight.data)}, opt);
    result.trace.push_back({it, opt.lr, bl.out.loss});
  }
  return result;
}

EvalReport evaluate(const Model& model, LossKind head, const Dataset& test,
                    const std::vector<std::int64_t>& train_counts, const GroupThresholds& groups) {
  validate_dataset(test);
  if (test.size() < 1) throw DataError("evaluate: empty test set");
  const int classes = model.classifier.classes();
  if (test.classes() > classes) throw DataError("evaluate: test set has more classes than the model");
  if (static_cast<int>(train_counts.size()) != classes) {
    throw DataError("evaluate: training counts do not match the model's class count");
  }

  const Tensor2 f = embed(model.backbone, test.features);
  const Tensor2 logits =
      head == LossKind::gcl ? cosine_logits(model.classifier, f) : dot_logits(model.classifier, f);

  EvalReport report;
  report.confusion.assign(static_cast<std::size_t>(classes) * classes, 0);
  std::vector<std::int64_t> correct(classes, 0);
  std::vector<std::int64_t> seen(classes, 0);
  for (int i = 0; i < test.size(); ++i) {
    auto zr = logits.row(i);
    int pred = 0;
    for (int j = 1; j < classes; ++j) {
      if (zr[j] > zr[pred]) pred = j;
    }
    const int truth = test.labels[i];
    report.confusion[static_cast<std::size_t>(truth) * classes + pred] += 1;
    seen[truth] += 1;
    if (pred == truth) correct[truth] += 1;
  }

  report.per_class_acc = Tensor1(classes, 0.0);
  std::int64_t total_correct = 0;
  for (int j = 0; j < classes; ++j) {
    total_correct += correct[j];
    if (seen[j] > 0) {
      report.per_class_acc[j] = static_cast<double>(correct[j]) / static_cast<double>(seen[j]);
    }
  }
  report.top1 = static_cast<double>(total_correct) / static_cast<double>(test.size());

  std::int64_t g_correct[3] = {0, 0, 0};
  std::int64_t g_seen[3] = {0, 0, 0};
  for (int j = 0; j < classes; ++j) {
    int g = 1;  // medium
    if (train_counts[j] > groups.many_gt) g = 0;
    else if (train_counts[j] < groups.few_lt) g = 2;
    g_correct[g] += correct[j];
    g_seen[g] += seen[j];
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.many_acc = g_seen[0] ? static_cast<double>(g_correct[0]) / g_seen[0] : nan;
  report.medium_acc = g_seen[1] ? static_cast<double>(g_correct[1]) / g_seen[1] : nan;
  report.few_acc = g_seen[2] ? static_cast<double>(g_correct[2]) / g_seen[2] : nan;
  return report;
}

void write_loss_trace(const std::string& path, const std::vector<LossTraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "iteration,lr,loss\n";
  for (const auto& row : trace) {
    out << row.iteration << "," << fmt_g17(row.lr) << "," << fmt_g17(row.loss) << "\n";
  }
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  const int classes = report.per_class_acc.len();
  out << "metric,value\n";
  out << "top1," << fmt_g17(report.top1) << "\n";
  out << "many_acc," << fmt_g17(report.many_acc) << "\n";
  out << "medium_acc," << fmt_g17(report.medium_acc) << "\n";
  out << "few_acc," << fmt_g17(report.few_acc) << "\n";
  for (int j = 0; j < classes; ++j) {
    out << "class_acc_" << j << "," << fmt_g17(report.per_class_acc[j]) << "\n";
  }
  for (int t = 0; t < classes; ++t) {
    for (int p = 0; p < classes; ++p) {
      out << "confusion_" << t << "_" << p << "," << report.confusion_at(t, p, classes) << "\n";
    }
  }
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "top1 %.4f | many %.4f | medium %.4f | few %.4f\n",
                report.top1, report.many_acc, report.medium_acc, report.few_acc);
  out << line;
  for (int j = 0; j < report.per_class_acc.len(); ++j) {
    std::snprintf(line, sizeof(line), "  class %2d acc %.4f\n", j, report.per_class_acc[j]);
    out << line;
  }
  return out.str();
}

void write_embeddings_csv(const std::string& path, const Model& model, const Dataset& ds) {
  Dataset dump;
  dump.features = embed(model.backbone, ds.features);
  dump.labels = ds.labels;
  dump.counts = ds.counts;
  dump.name = "embeddings";
  save_csv(dump, path);
}

ExperimentResult run_experiment(const TrainConfig& baseline_cfg, const TrainConfig& treatment_cfg,
                                const ExperimentSpec& spec, const std::string& out_dir) {
  baseline_cfg.validate();
  treatment_cfg.validate();
  const std::vector<std::int64_t> counts = longtail_counts(spec.tail);
  RngStream data_root(spec.data_seed);
  const Dataset train = synth_blobs(data_root, spec.blobs, counts);
  const Dataset test = balanced_test_split(data_root, spec.blobs, spec.test_per_class);

  ExperimentResult result;
  result.train_counts = counts;

  struct Arm {
    Model model;
    StageResult stage1;
    StageResult stage2;
  };
  auto run_arm = [&](const TrainConfig& cfg, EvalReport* stage1_report) {
    Arm arm;
    RngStream root(cfg.seed);
    arm.model = init_model_for(train, cfg, root);
    RngStream s1 = root.child("stage1");
    arm.stage1 = train_stage1(train, arm.model, cfg, s1);
    if (stage1_report) {
      *stage1_report = evaluate(arm.model, cfg.loss, test, counts, spec.groups);
    }
    RngStream s2 = root.child("stage2");
    arm.stage2 = train_stage2_crt(train, arm.model, cfg, s2);
    return arm;
  };

  Arm baseline = run_arm(baseline_cfg, nullptr);
  result.baseline = evaluate(baseline.model, baseline_cfg.loss, test, counts, spec.groups);
  Arm treatment = run_arm(treatment_cfg, &result.treatment_stage1);
  result.treatment_final = evaluate(treatment.model, treatment_cfg.loss, test, counts, spec.groups);

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string base = out_dir + "/";
    write_report_csv(base + "report_baseline.csv", result.baseline);
    write_report_csv(base + "report_treatment_stage1.csv", result.treatment_stage1);
    write_report_csv(base + "report_treatment.csv", result.treatment_final);
    write_loss_trace(base + "trace_baseline_stage1.csv", baseline.stage1.trace);
    write_loss_trace(base + "trace_treatment_stage1.csv", treatment.stage1.trace);
    write_loss_trace(base + "trace_treatment_stage2.csv", treatment.stage2.trace);

    const CloudSizeTable table = compute_cloud_sizes(counts, treatment_cfg.gcl.strategy,
                                                     treatment_cfg.gcl.pow_exponent);
    write_cloud_csv(base + "cloud_sizes.csv", counts, table);

    const ClassProbTable probs =
        class_probs(treatment_cfg.sampler.strategy, counts, table, treatment_cfg.sampler);
    RngStream diag(spec.data_seed);
    RngStream diag_child = diag.child("sampler-diag");
    const auto pools = class_pools(train.labels, train.classes());
    const int draws = 100000;
    Tensor1 freq(train.classes(), 0.0);
    const auto picked = draw_batch(diag_child, probs, pools, draws);
    for (int idx : picked) freq[train.labels[idx]] += 1.0 / draws;
    write_sampler_csv(base + "sampler.csv", counts, probs, freq);

    write_embeddings_csv(base + "embeddings.csv", treatment.model, test);

    Checkpoint b_ckpt{baseline.model, baseline_cfg.loss == LossKind::gcl ? HeadKind::cosine : HeadKind::dot,
                      baseline_cfg.gcl.scale, counts,
                      static_cast<std::uint64_t>(baseline_cfg.iters_stage1 + baseline_cfg.iters_stage2),
                      0, {}};
    save_checkpoint(b_ckpt, base + "baseline.ckpt");
    Checkpoint t_ckpt{treatment.model, treatment_cfg.loss == LossKind::gcl ? HeadKind::cosine : HeadKind::dot,
                      treatment_cfg.gcl.scale, counts,
                      static_cast<std::uint64_t>(treatment_cfg.iters_stage1 + treatment_cfg.iters_stage2),
                      0, {}};
    save_checkpoint(t_ckpt, base + "treatment.ckpt");

    std::ofstream summary(base + "summary.txt", std::ios::binary);
    summary << "corpus: blobs classes=" << spec.tail.classes << " head=" << spec.tail.head
            << " gamma=" << fmt_g17(spec.tail.gamma) << " dim=" << spec.blobs.dim
            << " test_per_class=" << spec.test_per_class << "\n";
    summary << "train counts:";
    for (auto c : counts) summary << " " << c;
    summary << "\n\nbaseline (" << loss_kind_name(baseline_cfg.loss) << "):\n"
            << report_table(result.baseline);
    summary << "\ntreatment (" << loss_kind_name(treatment_cfg.loss) << ") before re-training:\n"
            << report_table(result.treatment_stage1);
    summary << "\ntreatment (" << loss_kind_name(treatment_cfg.loss) << ") final:\n"
            << report_table(result.treatment_final);
  }
  return result;
}

}  // namespace gcl
