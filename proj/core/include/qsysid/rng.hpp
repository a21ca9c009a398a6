#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qsysid {

/// splitmix64 step, used to derive independent stream seeds from (seed, tag).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seedable stream generator with portable bit-exact output.
///
/// Distributions are implemented explicitly (std:: distributions are not
/// bit-stable across standard libraries). Separate streams derived from the
/// same seed with different tags are independent, so e.g. the input bits and
/// the measurement noise of a simulation never share a stream.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t tag)
      : gen_(splitmix64(splitmix64(seed) ^ splitmix64(tag))) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Fair coin: +1 or -1.
  double next_sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  /// Standard normal via Box-Muller.
  double next_gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

namespace stream_tag {
constexpr std::uint64_t prbs = 0x11;
constexpr std::uint64_t measurement_noise = 0x22;
}  // namespace stream_tag

}  // namespace qsysid
