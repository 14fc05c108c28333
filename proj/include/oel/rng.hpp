#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace oel {

/// Counter-based pseudorandom stream (SplitMix64 core). Value-like: copying
/// forks the stream, and the sequence depends only on the seed, never on
/// global state, so runs are reproducible bit-for-bit across machines.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; second member of each pair is cached.
  double next_normal();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Hierarchical seed derivation. A child is addressed by a (label, index)
/// step; distinct paths from the same master seed give statistically
/// independent streams, so ensemble members can be initialized in any order
/// (or concurrently) with identical results.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t master_seed) : state_(mix(0x6f656c2d73656564ULL ^ master_seed)) {}

  SeedTree child(const std::string& label, std::uint64_t index = 0) const {
    std::uint64_t h = state_;
    for (unsigned char c : label) h = mix(h ^ c);
    h = mix(h ^ (0x1000193ULL * (index + 1)));
    return SeedTree(h, internal_tag{});
  }

  Rng stream() const { return Rng(mix(state_ ^ 0x53545245414d31ULL)); }

  std::uint64_t state() const { return state_; }

 private:
  struct internal_tag {};
  SeedTree(std::uint64_t s, internal_tag) : state_(s) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return z ^ (z >> 33);
  }

  std::uint64_t state_;
};

}  // namespace oel
