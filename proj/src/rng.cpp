#include "gcl/rng.hpp"

#include <cmath>
#include <numbers>

#include "gcl/errors.hpp"

namespace gcl {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// 64-bit finalizer (splitmix64 / murmur3 style avalanche).
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(mix64(key_ ^ mix64(fnv1a64(label) + kGamma)));
}

std::uint64_t RngStream::next_u64() {
  counter_ += 1;
  return mix64(key_ + counter_ * kGamma);
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian(double mean, double stddev) {
  if (stddev < 0.0) throw DomainError("gaussian draw: negative stddev");
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double z = r * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

double gaussian_draw(RngStream& rng, double mean, double stddev) {
  return rng.next_gaussian(mean, stddev);
}

}  // namespace gcl
