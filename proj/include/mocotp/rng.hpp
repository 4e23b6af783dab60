#pragma once

#include <cstdint>
#include <string_view>

namespace mocotp {

// Deterministic counter-free PRNG (splitmix64 core). Unlike the std
// distributions, every draw here is specified arithmetic, so sequences are
// reproducible across compilers and platforms.
//
// Substreams are derived from the stream's root seed, not its current state:
// rng.substream(name) yields the same stream no matter how many draws were
// taken from `rng` before the call. All experiment randomness hangs off one
// root seed via named substreams (pretrain / probe / detkit / ...).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller.
  double normal();
  // Bernoulli with probability p.
  bool bernoulli(double p);

  Rng substream(std::string_view name) const;
  Rng substream(std::string_view name, std::uint64_t index) const;
  Rng substream(std::uint64_t a, std::uint64_t b = 0) const;

  std::uint64_t root_seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace mocotp
