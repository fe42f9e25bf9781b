#pragma once

// Laws of the compensated claims martingale M_t = lambda*t*mean(xi) - S_t and
// of its increments, plus a path sampler for the compound Poisson model.
//
// Exponential claims use the exact Poisson mixture of Erlang laws. Other claim
// laws fall back to Monte Carlo with a configurable sample count.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "core.hpp"
#include "surplus.hpp"

namespace bassre {

struct LawOptions {
  std::size_t mc_samples = 1'000'000;
  std::uint64_t seed = 20240601;
  double poisson_tail = 1e-12;
  /// Sample count per claim-count component when the k-fold claim sum has no closed form.
  std::size_t convolution_samples = 4096;
};

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

/// Summary of a one-dimensional law: right-continuous CDF, left-continuous
/// generalized-inverse quantile, first two moments and the atom at the top of the support.
struct LawSummary {
  Atom atom_top;
  std::function<double(double)> cdf;
  std::function<double(double)> quantile;
  double mean = 0.0;
  double variance = 0.0;
};

/// Poisson(mean) weights p_0..p_K with K the smallest index whose upper tail is below `tail`.
inline std::vector<double> poisson_weights(double mean, double tail = 1e-12) {
  require(is_finite(mean) && mean >= 0.0, "Poisson mean must be finite and >= 0");
  std::vector<double> p;
  double cum = 0.0;
  const double log_mean = mean > 0.0 ? std::log(mean) : 0.0;
  for (std::size_t k = 0;; ++k) {
    const double kd = static_cast<double>(k);
    const double pk = mean > 0.0 ? std::exp(-mean + kd * log_mean - std::lgamma(kd + 1.0))
                                 : (k == 0 ? 1.0 : 0.0);
    p.push_back(pk);
    cum += pk;
    if (1.0 - cum < tail && kd >= mean) break;
    if (k > 100000) throw Error("Poisson series did not reach the tail threshold");
  }
  return p;
}

/// CDF of M_t for exponential claims: P(M_t <= m) = sum_{k>=1} p_k P(Erlang(k, rate) >= c - m).
class ExponentialMtCdf {
public:
  ExponentialMtCdf(double rate, double top, std::vector<double> weights)
      : rate_(rate), top_(top), p_(std::move(weights)) {}

  double operator()(double m) const {
    if (m >= top_) return 1.0;
    const double z = rate_ * (top_ - m);
    // P(Erlang(k) > y) = P(Poisson(z) <= k-1)
    double term = std::exp(-z);
    double cum = term;
    double acc = 0.0;
    for (std::size_t k = 1; k < p_.size(); ++k) {
      if (k > 1) {
        term *= z / static_cast<double>(k - 1);
        cum += term;
      }
      acc += p_[k] * cum;
    }
    return std::min(acc, 1.0);
  }

  double top() const { return top_; }

private:
  double rate_;
  double top_;
  std::vector<double> p_;
};

namespace detail {

/// Generalized inverse of a CDF that is continuous and increasing below `top` and
/// jumps to 1 at `top` with mass `atom`.
inline double invert_continuous_below_top(const std::function<double(double)>& cdf, double top,
                                          double atom, double u) {
  if (u >= 1.0 - atom) return top;
  double width = 1.0;
  double lo = top - width;
  while (cdf(lo) >= u) {
    width *= 2.0;
    lo = top - width;
    if (width > 1e12) throw Error("quantile bracket search failed");
  }
  double hi = top;
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() *
                                             std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= u) hi = mid;
    else lo = mid;
  }
  return hi;
}

struct SortedSample {
  std::vector<double> xs;
  double cdf(double x) const {
    return static_cast<double>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) /
           static_cast<double>(xs.size());
  }
  double quantile(double u) const {
    const double scaled = std::ceil(u * static_cast<double>(xs.size()));
    const auto idx = static_cast<std::size_t>(std::clamp(scaled, 1.0, static_cast<double>(xs.size())));
    return xs[idx - 1];
  }
};

inline std::size_t sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  return static_cast<std::size_t>(std::poisson_distribution<long long>(mean)(rng));
}

}  // namespace detail

/// Law of M_t.
inline LawSummary mt_law(const SurplusSpec& spec, double t, const LawOptions& opts = {}) {
  spec.validate();
  require(is_finite(t) && t > 0.0, "time must be finite and > 0");
  const double top = spec.compensator(t);
  LawSummary law;
  law.atom_top = {top, spec.no_claim_probability(t)};
  law.mean = 0.0;
  law.variance = spec.mt_variance(t);

  if (const auto* exp_claims = std::get_if<ExponentialClaims>(&spec.claims.variant())) {
    auto cdf = std::make_shared<ExponentialMtCdf>(exp_claims->rate, top,
                                                  poisson_weights(spec.intensity * t, opts.poisson_tail));
    const double atom = law.atom_top.mass;
    law.cdf = [cdf](double m) { return (*cdf)(m); };
    law.quantile = [cdf, top, atom](double u) {
      return detail::invert_continuous_below_top([&](double m) { return (*cdf)(m); }, top, atom, u);
    };
    return law;
  }

  // Monte Carlo: N ~ Poisson(lambda t), M = top - sum of N claims.
  require(opts.mc_samples > 0, "Monte Carlo sample count must be > 0");
  auto sample = std::make_shared<detail::SortedSample>();
  sample->xs.resize(opts.mc_samples);
  Rng rng = make_stream(opts.seed, 0x4C41570000000000ULL);
  for (double& x : sample->xs) {
    const std::size_t n = detail::sample_poisson(spec.intensity * t, rng);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += spec.claims.sample(rng);
    x = top - s;
  }
  std::sort(sample->xs.begin(), sample->xs.end());
  const double atom = law.atom_top.mass;
  law.cdf = [sample, top](double m) { return m >= top ? 1.0 : sample->cdf(m); };
  law.quantile = [sample, top, atom](double u) {
    if (u > 1.0 - atom) return top;
    return std::min(sample->quantile(u), top);
  };
  return law;
}

/// Law of M_{t+s} - M_t; by stationarity of increments this is the law of M_s.
inline LawSummary increment_law(const SurplusSpec& spec, double s, const LawOptions& opts = {}) {
  spec.validate();
  require(is_finite(s) && s > 0.0, "increment length must be > 0");
  require(s <= spec.horizon * (1.0 + 1e-12), "increment length must not exceed the horizon");
  return mt_law(spec, s, opts);
}

inline QuantileGrid quantile_grid_of(const LawSummary& law, std::size_t n) {
  require(n >= 2, "grid size must be >= 2");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = law.quantile(QuantileGrid::level(i, n));
  for (std::size_t i = 1; i < n; ++i) v[i] = std::max(v[i], v[i - 1]);
  return QuantileGrid(std::move(v));
}

inline QuantileGrid mt_quantile_grid(const SurplusSpec& spec, double t, std::size_t n,
                                     const LawOptions& opts = {}) {
  require(n >= 2, "grid size must be >= 2");
  return quantile_grid_of(mt_law(spec, t, opts), n);
}

/// Gauss-Legendre nodes and weights on (0, 1).
template <std::size_t N>
std::pair<std::array<double, N>, std::array<double, N>> gauss_legendre_unit() {
  std::array<double, N> x{}, w{};
  for (std::size_t i = 0; i < N; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(N) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t j = 1; j <= N; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
      }
      dp = static_cast<double>(N) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Kernel of the increment Z = M_{t+s} - M_t for computing E[(a + Z)^+].
///
/// Z = c_s - S_s with c_s the compensator over the window. Conditioning on the claim
/// count k, E[(w - Gamma_k)^+] is exact for exponential (Erlang) and deterministic
/// claims; empirical claims use 64-node Gauss-Legendre quadrature on the Monte Carlo
/// quantile function of each k-fold claim sum.
class IncrementKernel {
public:
  IncrementKernel(const SurplusSpec& spec, double s, const LawOptions& opts = {})
      : shift_(spec.compensator(s)) {
    spec.validate();
    require(is_finite(s) && s >= 0.0, "increment length must be >= 0");
    p_ = poisson_weights(spec.intensity * s, opts.poisson_tail);
    if (const auto* e = std::get_if<ExponentialClaims>(&spec.claims.variant())) {
      kind_ = Kind::Erlang;
      rate_ = e->rate;
    } else if (const auto* d = std::get_if<DeterministicClaims>(&spec.claims.variant())) {
      kind_ = Kind::Lattice;
      size_ = d->size;
    } else {
      kind_ = Kind::Quadrature;
      const auto [nodes, weights] = gauss_legendre_unit<64>();
      gl_weights_.assign(weights.begin(), weights.end());
      Rng rng = make_stream(opts.seed, 0x434F4E5600000000ULL);
      sum_quantiles_.resize(p_.size());
      std::vector<double> sums(opts.convolution_samples);
      for (std::size_t k = 1; k < p_.size(); ++k) {
        for (double& v : sums) {
          v = 0.0;
          for (std::size_t j = 0; j < k; ++j) v += spec.claims.sample(rng);
        }
        std::sort(sums.begin(), sums.end());
        detail::SortedSample sorted{sums};
        auto& q = sum_quantiles_[k];
        q.resize(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) q[i] = sorted.quantile(nodes[i]);
      }
    }
  }

  /// Compensator over the window; the atom of Z (no claim) sits here.
  double shift() const { return shift_; }
  const std::vector<double>& weights() const { return p_; }

  /// E[(a + Z)^+].
  double expected_positive_part(double a) const {
    const double w = a + shift_;
    if (w <= 0.0) return 0.0;
    double acc = p_[0] * w;
    switch (kind_) {
      case Kind::Erlang: {
        // E[(w - G_k)^+] = w P(G_k <= w) - (k/rate) P(G_{k+1} <= w),  P(G_k <= w) = P(Pois(rate w) >= k)
        const double z = rate_ * w;
        double term = std::exp(-z);  // Pois pmf at j
        double below = term;         // P(Pois <= j), j = 0
        // g_k = P(Pois >= k) = 1 - P(Pois <= k-1)
        double g_k = 1.0 - below;  // k = 1
        for (std::size_t k = 1; k < p_.size(); ++k) {
          term *= z / static_cast<double>(k);
          below += term;
          const double g_next = std::max(0.0, 1.0 - below);
          acc += p_[k] * (w * g_k - (static_cast<double>(k) / rate_) * g_next);
          g_k = g_next;
        }
        break;
      }
      case Kind::Lattice:
        for (std::size_t k = 1; k < p_.size(); ++k)
          acc += p_[k] * std::max(0.0, w - static_cast<double>(k) * size_);
        break;
      case Kind::Quadrature:
        for (std::size_t k = 1; k < p_.size(); ++k) {
          double part = 0.0;
          const auto& q = sum_quantiles_[k];
          for (std::size_t i = 0; i < q.size(); ++i) part += gl_weights_[i] * std::max(0.0, w - q[i]);
          acc += p_[k] * part;
        }
        break;
    }
    return acc;
  }

private:
  enum class Kind { Erlang, Lattice, Quadrature };
  double shift_;
  std::vector<double> p_;
  Kind kind_ = Kind::Erlang;
  double rate_ = 1.0;
  double size_ = 1.0;
  std::vector<double> gl_weights_;
  std::vector<std::vector<double>> sum_quantiles_;
};

/// Truncated moments (P(M <= y), E[M; M <= y], E[M^2; M <= y]) of M_t.
struct TruncatedMoments {
  double p = 0.0, m1 = 0.0, m2 = 0.0;
};

/// Truncated moments of M_t. Exact for exponential claims via
/// E[G_k^i; G_k >= s] = k(k+1)..(k+i-1)/rate^i * P(G_{k+i} >= s); other claim laws use
/// prefix sums over a sorted Monte Carlo sample.
class MtMoments {
public:
  MtMoments(const SurplusSpec& spec, double t, const LawOptions& opts = {})
      : top_(spec.compensator(t)), var_(spec.mt_variance(t)) {
    spec.validate();
    require(is_finite(t) && t > 0.0, "time must be finite and > 0");
    p_ = poisson_weights(spec.intensity * t, opts.poisson_tail);
    if (const auto* e = std::get_if<ExponentialClaims>(&spec.claims.variant())) {
      exact_ = true;
      rate_ = e->rate;
      return;
    }
    xs_.resize(opts.mc_samples);
    Rng rng = make_stream(opts.seed, 0x4D4F4D0000000000ULL);
    for (double& x : xs_) {
      const std::size_t n = detail::sample_poisson(spec.intensity * t, rng);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += spec.claims.sample(rng);
      x = top_ - s;
    }
    std::sort(xs_.begin(), xs_.end());
    c1_.assign(xs_.size() + 1, 0.0);
    c2_.assign(xs_.size() + 1, 0.0);
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      c1_[i + 1] = c1_[i] + xs_[i];
      c2_[i + 1] = c2_[i] + xs_[i] * xs_[i];
    }
  }

  double top() const { return top_; }

  TruncatedMoments below(double y) const {
    if (y >= top_) {
      if (exact_) return {1.0, 0.0, var_};
    }
    if (!exact_) {
      const auto idx = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), y) - xs_.begin());
      const double n = static_cast<double>(xs_.size());
      return {static_cast<double>(idx) / n, c1_[idx] / n, c2_[idx] / n};
    }
    // M <= y  <=>  S >= s with s = top - y > 0; the no-claim atom never qualifies.
    const double s = top_ - y;
    const double z = rate_ * s;
    // upper[m] = P(G_m >= s) = P(Pois(z) <= m - 1)
    const std::size_t K = p_.size() + 2;
    std::vector<double> upper(K + 1, 0.0);
    double term = std::exp(-z), cum = term;
    upper[1] = cum;
    for (std::size_t m = 2; m <= K; ++m) {
      term *= z / static_cast<double>(m - 1);
      cum += term;
      upper[m] = std::min(1.0, cum);
    }
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    for (std::size_t k = 1; k < p_.size(); ++k) {
      const double kd = static_cast<double>(k);
      a0 += p_[k] * upper[k];
      a1 += p_[k] * kd / rate_ * upper[k + 1];
      a2 += p_[k] * kd * (kd + 1.0) / (rate_ * rate_) * upper[k + 2];
    }
    return {a0, top_ * a0 - a1, top_ * top_ * a0 - 2.0 * top_ * a1 + a2};
  }

private:
  double top_, var_;
  std::vector<double> p_;
  bool exact_ = false;
  double rate_ = 1.0;
  std::vector<double> xs_, c1_, c2_;
};

/// Simulated jump times, claim sizes and values of M for a set of independent paths.
/// Jumps of path p occupy the index range [jump_offset[p], jump_offset[p+1]).
struct PathSkeleton {
  std::uint64_t seed = 0;
  std::size_t n_paths = 0;
  double horizon = 0.0;
  double compensator_rate = 0.0;  // lambda * mean(claims)
  std::vector<double> record_times;
  std::vector<std::size_t> jump_offset;
  std::vector<double> jump_time;
  std::vector<double> claim;
  std::vector<double> m_before;   // M_{t-} at each jump
  std::vector<double> m_record;   // n_paths x record_times, row-major

  std::size_t n_jumps(std::size_t path) const { return jump_offset[path + 1] - jump_offset[path]; }
  double m_at_record(std::size_t path, std::size_t r) const {
    return m_record[path * record_times.size() + r];
  }
};

inline PathSkeleton sample_paths(const SurplusSpec& spec, std::size_t n_paths, std::uint64_t seed,
                                 std::vector<double> record_times) {
  spec.validate();
  if (n_paths == 0) throw InvalidArgument("n_paths must be > 0");
  for (std::size_t i = 0; i < record_times.size(); ++i) {
    require(record_times[i] >= 0.0 && record_times[i] <= spec.horizon, "record times must lie in [0, T]");
    if (i > 0 && record_times[i] < record_times[i - 1])
      throw InvalidArgument("record times must be sorted");
  }
  PathSkeleton sk;
  sk.seed = seed;
  sk.n_paths = n_paths;
  sk.horizon = spec.horizon;
  sk.compensator_rate = spec.intensity * spec.claims.mean();
  sk.record_times = std::move(record_times);
  sk.jump_offset.reserve(n_paths + 1);
  sk.jump_offset.push_back(0);
  sk.m_record.resize(n_paths * sk.record_times.size());

  std::vector<double> times;
  for (std::size_t p = 0; p < n_paths; ++p) {
    Rng rng = make_stream(seed, p);
    const std::size_t n = detail::sample_poisson(spec.intensity * spec.horizon, rng);
    times.resize(n);
    std::uniform_real_distribution<double> unif(0.0, spec.horizon);
    for (double& t : times) t = unif(rng);
    std::sort(times.begin(), times.end());
    double cum = 0.0;
    for (double t : times) {
      const double xi = spec.claims.sample(rng);
      sk.jump_time.push_back(t);
      sk.claim.push_back(xi);
      sk.m_before.push_back(spec.compensator(t) - cum);
      cum += xi;
    }
    sk.jump_offset.push_back(sk.jump_time.size());
    // claims at or before each record time
    const std::size_t base = sk.jump_offset[p];
    std::size_t j = 0;
    double paid = 0.0;
    for (std::size_t r = 0; r < sk.record_times.size(); ++r) {
      const double t = sk.record_times[r];
      while (j < n && times[j] <= t) paid += sk.claim[base + j++];
      sk.m_record[p * sk.record_times.size() + r] = spec.compensator(t) - paid;
    }
  }
  return sk;
}

}  // namespace bassre
