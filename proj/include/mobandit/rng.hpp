#pragma once

#include <array>
#include <cstdint>

namespace mobandit::rng {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Pure function of (counter, key).
Philox4x32Counter philox4x32(Philox4x32Counter counter, Philox4x32Key key);

/// Separates the independent consumers of one seed.
enum class Domain : std::uint8_t {
  Environment = 1,
  Policy = 2,
  Validation = 3,
};

/// Address of one independent random sequence. Two cells with equal fields
/// yield identical draws, regardless of what else has been drawn elsewhere.
struct Cell {
  std::uint64_t seed = 0;
  Domain domain = Domain::Environment;
  std::uint32_t repetition = 0;
  std::uint32_t episode = 0;
  std::uint32_t lane = 0;  // < 2^24
};

/// Sequential reader over one cell's draws.
class CellStream {
 public:
  explicit CellStream(const Cell& cell);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via Box-Muller; consumes draws in pairs.
  double normal();

 private:
  void refill();

  Philox4x32Counter counter_;
  Philox4x32Key key_;
  Philox4x32Counter block_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mobandit::rng
