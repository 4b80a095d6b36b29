#pragma once

#include <cstdint>
#include <limits>

namespace eim {

/// Counter-based generator: draw n of stream (seed, stream) is a pure
/// function of (seed, stream, n), so streams can be split off and replayed
/// independently.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t child) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Well-known stream ids used by the trainer and CLI.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTrainData = 2;
inline constexpr std::uint64_t kTrainNoise = 3;
inline constexpr std::uint64_t kEvalData = 4;
inline constexpr std::uint64_t kEvalNoise = 5;
inline constexpr std::uint64_t kSample = 6;
}  // namespace streams

}  // namespace eim
