#include "mocotp/rng.hpp"

#include <cmath>

#include "mocotp/error.hpp"

namespace mocotp {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(x);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {
  // Warm the state so seeds 0 and 1 do not produce correlated openings.
  (void)splitmix64(state_);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_below: n must be positive");
  // Rejection sampling over the largest multiple of n.
  const std::uint64_t limit = n * ((~0ULL) / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw ContractError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform_below(span));
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

Rng Rng::substream(std::string_view name) const {
  return Rng(mix(seed_, fnv1a(name)));
}

Rng Rng::substream(std::string_view name, std::uint64_t index) const {
  return Rng(mix(mix(seed_, fnv1a(name)), index + 0x6a09e667ULL));
}

Rng Rng::substream(std::uint64_t a, std::uint64_t b) const {
  return Rng(mix(mix(seed_, a + 0x51ed2701ULL), b + 0xa24baed4ULL));
}

}  // namespace mocotp
