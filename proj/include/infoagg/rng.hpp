#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, rep, agent, stream, index), so parallel and serial runs produce
// identical shocks and replications can be evaluated in any order.

#include <cstdint>

#include <cmath>

namespace infoagg::rng {

inline constexpr std::uint64_t kGlobalAgent = ~std::uint64_t{0};

enum class Stream : std::uint64_t {
  Theta = 1,
  CommonError = 2,
  PrivateSignal = 3,
  ReadingNoise = 4,
  LlnSignal = 5,
  LlnReading = 6,
  QueryNoise = 7,
  AnswerCommon = 8,
  AnswerIdiosyncratic = 9,
  ParameterDraw = 10,
};

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t keyed_u64(std::uint64_t seed, std::uint64_t rep, std::uint64_t agent,
                               Stream stream, std::uint64_t index) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ rep);
  h = mix64(h ^ agent);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ index);
  return h;
}

// Uniform draw in (0, 1].
inline double keyed_uniform(std::uint64_t seed, std::uint64_t rep, std::uint64_t agent,
                            Stream stream, std::uint64_t index) {
  return static_cast<double>((keyed_u64(seed, rep, agent, stream, index) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller; each draw consumes the uniform pair at
// indices (2k, 2k+1) of its stream.
inline double keyed_normal(std::uint64_t seed, std::uint64_t rep, std::uint64_t agent,
                           Stream stream, std::uint64_t index) {
  const double u1 = keyed_uniform(seed, rep, agent, stream, 2 * index);
  const double u2 = keyed_uniform(seed, rep, agent, stream, 2 * index + 1);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace infoagg::rng
