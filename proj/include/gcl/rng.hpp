#pragma once

#include <cstdint>
#include <string_view>

namespace gcl {

// Counter-based random stream: each output is a stateless mix of (seed, counter),
// so identical seeds give bit-identical sequences on every platform. Sub-streams
// are derived from a text label; distinct labels give unrelated sequences.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(seed) {}

  RngStream child(std::string_view label) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_uniform();

  // Gaussian via Box-Muller on two uniform draws; stddev 0 returns the mean exactly.
  double next_gaussian(double mean, double stddev);

  std::uint64_t seed() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

double gaussian_draw(RngStream& rng, double mean, double stddev);

// FNV-1a over raw bytes; used for stream labels and content hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace gcl
