#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcl/rng.hpp"
#include "gcl/tensor.hpp"

namespace gcl {

struct Dataset {
  Tensor2 features;             // N x input_dim
  std::vector<int> labels;      // length N, values in [0, classes)
  std::vector<std::int64_t> counts;  // per-class label histogram
  std::string name;

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
  int classes() const { return static_cast<int>(counts.size()); }
};

// Recomputes the label histogram and checks the invariants.
void validate_dataset(const Dataset& ds);

// Exponential long-tail profile: count_i = round(head * mu^i) with
// mu = gamma^(-1/(classes-1)); the head class is pinned to exactly `head`.
struct LongTailSpec {
  std::int64_t head = 5000;
  int classes = 10;
  double gamma = 100.0;  // ratio of most to least frequent class
};

std::vector<std::int64_t> longtail_counts(const LongTailSpec& spec);

// Gaussian blob generator standing in for image corpora at desk scale.
// Class centers are a pure function of the base stream ("centers" child), so
// train and test splits built from the same base share geometry while using
// disjoint noise streams.
struct BlobSpec {
  int classes = 10;
  int dim = 32;
  double center_scale = 1.0;
  double noise_std = 1.0;
};

Tensor2 blob_centers(const RngStream& base, const BlobSpec& spec);

Dataset synth_blobs(const RngStream& base, const BlobSpec& spec,
                    const std::vector<std::int64_t>& counts,
                    std::string_view noise_label = "train-noise");

Dataset balanced_test_split(const RngStream& base, const BlobSpec& spec, int per_class);

// CSV schema: header f0,...,f{d-1},label; 17-significant-digit decimal text,
// round-trip stable. Labels are non-negative integers in the last column.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

double imbalance_ratio(const Dataset& ds);
double imbalance_ratio(const std::vector<std::int64_t>& counts);

// Human-readable dataset summary: per-class counts, gamma, N.
std::string dataset_summary(const Dataset& ds);

}  // namespace gcl
