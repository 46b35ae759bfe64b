#pragma once

#include <cstdint>
#include <random>

namespace ratesched {

// All randomness in a run flows from one root seed. Streams are derived by
// counter-based splitting: seed(root, purpose, a, b) = splitmix64 chain over
// the three keys. Changing how one stream is consumed (e.g. arrivals of one
// user) never perturbs any other stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  Environment = 1,
  Arrival = 2,       // sub-keyed by user
  PacketLength = 3,  // sub-keyed by user
  NoiseE = 4,        // sub-keyed by user
  NoiseS = 5,        // sub-keyed by user
  Replica = 6,       // sub-keyed by replica index
  Probe = 7,
};

inline std::uint64_t derive_seed(std::uint64_t root, Stream purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(root ^ splitmix64(static_cast<std::uint64_t>(purpose)));
  s = splitmix64(s ^ splitmix64(a));
  return splitmix64(s ^ splitmix64(b));
}

inline std::mt19937_64 make_engine(std::uint64_t root, Stream purpose,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
  return std::mt19937_64(derive_seed(root, purpose, a, b));
}

// Gamma variate pinned by (mean, squared coefficient of variation);
// scv = 1 recovers the exponential law.
inline double gamma_mean_scv(std::mt19937_64& eng, double mean, double scv) {
  std::gamma_distribution<double> d(1.0 / scv, scv * mean);
  return d(eng);
}

}  // namespace ratesched
