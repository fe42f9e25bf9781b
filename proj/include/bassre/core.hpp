#pragma once

// Shared error types, RNG stream derivation and small numeric helpers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bassre {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A constraint level (p, u, v, 1/2) does not land on a cell boundary of the grid.
class IncompatibleGrid : public Error {
public:
  using Error::Error;
};

/// The target assigns different values across an atom of the source law,
/// so no monotone transport map exists.
class NonConstantOnAtom : public Error {
public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline bool is_finite(double x) { return std::isfinite(x); }

// SplitMix64 finaliser; used to derive independent per-path streams from (seed, index).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ULL)));
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population variance (divisor n).
inline double variance_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

/// Sample standard deviation (divisor n-1).
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Rounds x*n to an integer index, failing when x*n is not (numerically) integral.
inline std::size_t integral_level(double x, std::size_t n, const char* what) {
  const double scaled = x * static_cast<double>(n);
  const double r = std::round(scaled);
  if (std::abs(scaled - r) > 1e-9 * std::max(1.0, std::abs(scaled)))
    throw IncompatibleGrid(std::string(what) + "*n = " + std::to_string(scaled) +
                           " is not an integer (n = " + std::to_string(n) + ")");
  return static_cast<std::size_t>(r);
}

}  // namespace bassre
