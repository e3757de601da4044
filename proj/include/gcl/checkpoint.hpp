#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcl/model.hpp"

namespace gcl {

// Versioned binary snapshot of a model plus training bookkeeping.
//
// Layout (all multi-byte fields little-endian):
//   magic "GCLCKPT\0" | u32 version | u8 head kind | f64 logit scale
//   u32 input_dim | u32 num_layers | u32 out_dim per layer | u32 classes
//   per layer: weight (in*out f64), bias (out f64); classifier weight (dim*classes f64)
//   u32 count entries | i64 per-class training count
//   u64 iteration | u64 config hash
//   u8 has_velocity | velocity buffers (f64, parameter order) when set
struct Checkpoint {
  Model model;
  HeadKind head = HeadKind::cosine;
  double scale = 30.0;
  std::vector<std::int64_t> train_counts;
  std::uint64_t iteration = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::vector<double>> velocity;  // empty when optimizer state is not kept
};

// Writes to a temp file and renames into place.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gcl
