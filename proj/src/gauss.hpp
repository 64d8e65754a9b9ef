#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace plc::detail {

// Deterministic normal sampler. mt19937_64 output is fully specified by the
// standard; std::normal_distribution is not, so Box-Muller is done by hand to
// keep seeded streams stable.
class GaussStream {
 public:
  GaussStream(std::uint64_t seed, std::uint32_t stream_tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      stream_tag};
    engine_.seed(seq);
  }

  // Standard normal. limit_sigmas > 0 truncates by resampling.
  double next(double limit_sigmas = 0.0) {
    for (;;) {
      double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
      double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
      double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      if (limit_sigmas <= 0.0 || std::abs(z) <= limit_sigmas) return z;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace plc::detail
