#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcl/data.hpp"
#include "gcl/loss.hpp"
#include "gcl/model.hpp"
#include "gcl/sampler.hpp"

namespace gcl {

enum class LossKind : std::uint8_t { gcl = 0, ce = 1 };

std::string loss_kind_name(LossKind k);
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig {
  std::int64_t iters_stage1 = 3000;
  std::int64_t iters_stage2 = 500;
  double lr = 0.1;
  double momentum = 0.9;
  std::vector<double> milestone_fracs = {0.6, 0.8};  // per-stage fractions of the iteration count
  double lr_decay = 0.1;
  int batch_size = 64;
  std::uint64_t seed = 1;
  bool mixup = false;
  double mixup_alpha = 1.0;
  LossKind loss = LossKind::gcl;
  std::vector<int> hidden_dims = {64, 64};
  int embed_dim = 16;
  GclConfig gcl;
  SamplerSpec sampler;

  void validate() const;
};

struct LossTraceRow {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct StageResult {
  std::vector<LossTraceRow> trace;
};

Model init_model_for(const Dataset& train, const TrainConfig& cfg, RngStream& rng);

// Stage 1: instance-balanced batches, all parameters updated.
StageResult train_stage1(const Dataset& train, Model& model, const TrainConfig& cfg,
                         RngStream& rng);

// Stage 2 (cRT): batches drawn from the configured class-probability table,
// representation frozen, only classifier weights updated.
StageResult train_stage2_crt(const Dataset& train, Model& model, const TrainConfig& cfg,
                             RngStream& rng);

// Class buckets by training count for the grouped metrics:
// many when count > many_gt, few when count < few_lt, medium otherwise.
struct GroupThresholds {
  std::int64_t many_gt = 100;
  std::int64_t few_lt = 20;
};

struct EvalReport {
  double top1 = 0.0;
  Tensor1 per_class_acc;
  double many_acc = 0.0;
  double medium_acc = 0.0;
  double few_acc = 0.0;
  std::vector<std::int64_t> confusion;  // classes x classes, row = true label

  std::int64_t confusion_at(int truth, int pred, int classes) const {
    return confusion[static_cast<std::size_t>(truth) * classes + pred];
  }
};

// Predictions are the argmax of the evaluation-path logits (perturbation off,
// margins removed), so they do not depend on the logit scale.
EvalReport evaluate(const Model& model, LossKind head, const Dataset& test,
                    const std::vector<std::int64_t>& train_counts,
                    const GroupThresholds& groups = {});

void write_loss_trace(const std::string& path, const std::vector<LossTraceRow>& trace);
void write_report_csv(const std::string& path, const EvalReport& report);
std::string report_table(const EvalReport& report);
void write_embeddings_csv(const std::string& path, const Model& model, const Dataset& ds);

struct ExperimentSpec {
  LongTailSpec tail;
  BlobSpec blobs;
  int test_per_class = 200;
  std::uint64_t data_seed = 9000;
  GroupThresholds groups;
};

struct ExperimentResult {
  EvalReport baseline;           // baseline arm after its configured stages
  EvalReport treatment_stage1;   // treatment arm before classifier re-training
  EvalReport treatment_final;    // treatment arm after its configured stages
  std::vector<std::int64_t> train_counts;
};

// Runs two arms on the same generated corpus (shared data seed); each arm
// trains from its own stream. With out_dir nonempty, writes reports, traces,
// the cloud-size table, sampler diagnostics, checkpoints, and an embedding
// dump of the test set.
ExperimentResult run_experiment(const TrainConfig& baseline_cfg, const TrainConfig& treatment_cfg,
                                const ExperimentSpec& spec, const std::string& out_dir = "");

}  // namespace gcl
