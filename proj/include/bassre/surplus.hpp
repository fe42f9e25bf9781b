#pragma once

// Model parameters of the compound Poisson surplus process and the quantile
// grid that serves as the solver's decision variable.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"

namespace bassre {

struct ExponentialClaims {
  double rate = 1.0;
};

struct DeterministicClaims {
  double size = 1.0;
};

struct EmpiricalClaims {
  std::vector<double> samples;
};

/// Law of an individual claim size.
class ClaimLaw {
public:
  using Variant = std::variant<ExponentialClaims, DeterministicClaims, EmpiricalClaims>;

  ClaimLaw() : law_(ExponentialClaims{}) {}
  ClaimLaw(Variant law) : law_(std::move(law)) { validate(); }  // NOLINT(implicit)

  static ClaimLaw exponential(double rate) { return ClaimLaw(ExponentialClaims{rate}); }
  static ClaimLaw deterministic(double size) { return ClaimLaw(DeterministicClaims{size}); }
  static ClaimLaw empirical(std::vector<double> xs) { return ClaimLaw(EmpiricalClaims{std::move(xs)}); }

  const Variant& variant() const { return law_; }
  bool is_exponential() const { return std::holds_alternative<ExponentialClaims>(law_); }
  bool is_deterministic() const { return std::holds_alternative<DeterministicClaims>(law_); }
  bool is_empirical() const { return std::holds_alternative<EmpiricalClaims>(law_); }

  double mean() const {
    return std::visit(
        [](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ExponentialClaims>) return 1.0 / c.rate;
          else if constexpr (std::is_same_v<T, DeterministicClaims>) return c.size;
          else return mean_of(c.samples);
        },
        law_);
  }

  double second_moment() const {
    return std::visit(
        [](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ExponentialClaims>) return 2.0 / (c.rate * c.rate);
          else if constexpr (std::is_same_v<T, DeterministicClaims>) return c.size * c.size;
          else {
            double s = 0.0;
            for (double x : c.samples) s += x * x;
            return s / static_cast<double>(c.samples.size());
          }
        },
        law_);
  }

  double sample(Rng& rng) const {
    return std::visit(
        [&rng](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ExponentialClaims>) {
            return std::exponential_distribution<double>(c.rate)(rng);
          } else if constexpr (std::is_same_v<T, DeterministicClaims>) {
            return c.size;
          } else {
            std::uniform_int_distribution<std::size_t> pick(0, c.samples.size() - 1);
            return c.samples[pick(rng)];
          }
        },
        law_);
  }

  std::string name() const {
    if (is_exponential()) return "exponential";
    if (is_deterministic()) return "deterministic";
    return "empirical";
  }

private:
  void validate() const {
    std::visit(
        [](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ExponentialClaims>) {
            require(is_finite(c.rate) && c.rate > 0.0, "exponential claim rate must be > 0");
          } else if constexpr (std::is_same_v<T, DeterministicClaims>) {
            require(is_finite(c.size) && c.size > 0.0, "deterministic claim size must be > 0");
          } else {
            require(!c.samples.empty(), "empirical claim law needs at least one sample");
            for (double x : c.samples)
              require(is_finite(x) && x > 0.0, "empirical claim samples must be finite and > 0");
          }
        },
        law_);
  }

  Variant law_;
};

/// Cramer-Lundberg surplus U_t = u0 + g(t) + M_t with g(t) = theta * mean(claims) * lambda * t.
struct SurplusSpec {
  double intensity = 1.0;
  double horizon = 1.0;
  ClaimLaw claims{};
  double loading = 0.0;
  double initial_capital = 0.0;
  double surcharge_alpha = 0.0;

  void validate() const {
    require(is_finite(intensity) && intensity > 0.0, "intensity must be finite and > 0");
    require(is_finite(horizon) && horizon > 0.0, "horizon must be finite and > 0");
    require(is_finite(loading) && loading >= 0.0, "loading must be finite and >= 0");
    require(is_finite(initial_capital) && initial_capital >= 0.0, "initial capital must be >= 0");
    require(is_finite(surcharge_alpha) && surcharge_alpha >= 0.0, "surcharge alpha must be >= 0");
  }

  /// Expected cumulative claims lambda * t * mean(claims); also the top of the support of M_t.
  double compensator(double t) const { return intensity * t * claims.mean(); }
  double drift(double t) const { return loading * compensator(t); }
  double mt_variance(double t) const { return intensity * t * claims.second_moment(); }
  /// Probability of no claim in a window of length t.
  double no_claim_probability(double t) const { return std::exp(-intensity * t); }
};

/// Quantile function sampled at the cell midpoints (i - 1/2)/n.
class QuantileGrid {
public:
  QuantileGrid() = default;
  explicit QuantileGrid(std::vector<double> values) : values_(std::move(values)) { validate(); }

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> span() const { return values_; }

  static double level(std::size_t i, std::size_t n) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  }

  /// Value at probability level p using the cell index ceil(p*n) (1-based); p*n must be integral.
  double at_level(double p, const char* what = "level") const {
    const std::size_t j = integral_level(p, size(), what);
    require(j >= 1 && j <= size(), "quantile level out of range");
    return values_[j - 1];
  }

  double mean() const { return mean_of(values_); }
  double variance() const { return variance_of(values_); }
  /// Grid recentred to mean zero.
  QuantileGrid centered() const {
    std::vector<double> v = values_;
    const double m = mean();
    for (double& x : v) x -= m;
    return QuantileGrid(std::move(v));
  }

private:
  void validate() const {
    require(!values_.empty(), "quantile grid must be non-empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      require(is_finite(values_[i]), "quantile grid entries must be finite");
      if (i > 0)
        require(values_[i] >= values_[i - 1], "quantile grid must be non-decreasing");
    }
  }

  std::vector<double> values_;
};

}  // namespace bassre
