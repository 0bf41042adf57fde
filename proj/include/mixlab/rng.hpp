#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mixlab {

/// A seeded 64-bit random stream identified by (seed, stream id).
///
/// The engine is std::mt19937_64 seeded through std::seed_seq, both of which
/// are fully specified by the standard, so the raw word sequence is the same
/// on every conforming platform. Conversions to doubles and bounded integers
/// are done here rather than with <random> distributions, whose algorithms
/// are implementation-defined.
///
/// A stream can log every raw word it hands out, and a stream built with
/// replaying() returns a previously logged sequence instead of generating.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  static RngStream replaying(std::span<const std::uint64_t> words);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform on {0, ..., bound - 1}; bound must be positive.
  std::uint64_t index(std::uint64_t bound);

  /// Bernoulli(p) via uniform() < p.
  bool bernoulli(double p) { return uniform() < p; }

  /// Appends every subsequent raw word to *log. Pass nullptr to stop.
  void record_into(std::vector<std::uint64_t>* log) { log_ = log; }

  /// Number of raw words consumed so far.
  std::uint64_t words_consumed() const { return consumed_; }

 private:
  RngStream() = default;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::mt19937_64 engine_;
  std::vector<std::uint64_t>* log_ = nullptr;
  std::span<const std::uint64_t> replay_;
  bool replay_mode_ = false;
  std::uint64_t consumed_ = 0;
};

/// Mixes a root seed with a label (checker id, purpose tag) into a child seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

}  // namespace mixlab
