#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "lss_spec.hpp"
#include "parallel.hpp"

namespace lss {

// Simulation cell: K interactions of order L on the leading features, all
// with sign Minus, beta = 1 and a common threshold calibrated to `coverage`.
struct ScenarioConfig {
  std::size_t K{1};
  std::size_t L{2};
  std::size_t n{1000};
  std::size_t p{20};
  double snr{std::numeric_limits<double>::infinity()};
  NoiseFamily noise_family{NoiseFamily::Gaussian};
  double correlation_alpha{0.0};
  std::size_t overlap{0};
  double coverage{0.5};
  std::uint64_t seed{0};

  // Number of distinct features used by the interactions.
  [[nodiscard]] std::size_t signal_width() const { return K == 0 ? 0 : K * L - overlap * (K - 1); }
};

inline void validate_scenario(const ScenarioConfig& c) {
  if (c.K < 1) throw ValidationError("K must be >= 1");
  if (c.L < 1) throw ValidationError("L must be >= 1");
  if (c.p < 1) throw ValidationError("p must be >= 1");
  if (c.overlap >= c.L && c.K > 1) throw ValidationError("overlap must be smaller than L");
  if (c.K * c.L < c.overlap * (c.K - 1) || c.signal_width() > c.p) {
    throw ValidationError("K*L - overlap*(K-1) must not exceed p");
  }
  if (!(c.coverage > 0.0 && c.coverage < 1.0)) throw ValidationError("coverage must lie in (0,1)");
  if (!(c.snr > 0.0)) throw ValidationError("snr must be positive");
  if (!(c.correlation_alpha >= 0.0 && c.correlation_alpha < 1.0)) {
    throw ValidationError("correlation_alpha must lie in [0,1)");
  }
  if (c.K > 20) throw ValidationError("at most 20 interactions are supported");
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// 0-based feature columns of interaction j under the consecutive layout.
inline std::vector<std::size_t> interaction_columns(std::size_t j, std::size_t L, std::size_t overlap) {
  std::vector<std::size_t> cols(L);
  for (std::size_t l = 0; l < L; ++l) cols[l] = j * (L - overlap) + l;
  return cols;
}

// P(X in union of the K rectangles) for a common threshold tau, by exact
// inclusion-exclusion over subsets of interactions.
inline double union_probability(std::size_t K, std::size_t L, std::size_t overlap, double tau) {
  const std::size_t width = K * L - overlap * (K - 1);
  double total = 0.0;
  for (std::uint32_t mask = 1; mask < (1U << K); ++mask) {
    std::vector<bool> used(width, false);
    std::size_t features = 0;
    for (std::size_t j = 0; j < K; ++j) {
      if (!(mask >> j & 1U)) continue;
      for (auto c : interaction_columns(j, L, overlap)) {
        if (!used[c]) {
          used[c] = true;
          ++features;
        }
      }
    }
    const double term = std::pow(tau, static_cast<double>(features));
    total += (std::popcount(mask) % 2 == 1) ? term : -term;
  }
  return total;
}

}  // namespace detail

// n x p Uniform[0,1] features. alpha > 0 couples neighbouring columns through
// a Gaussian copula with AR(1) correlation alpha^|i-j|.
inline Dataset gen_features(std::size_t n, std::size_t p, double alpha, std::uint64_t seed) {
  if (p < 1) throw ValidationError("p must be >= 1");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("correlation alpha must lie in [0,1)");
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::mt19937_64 rng(derive_seed(seed, 0));
  if (alpha == 0.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < p; ++k) cols[k][i] = unif(rng);
    }
  } else {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double innovation = std::sqrt(1.0 - alpha * alpha);
    for (std::size_t i = 0; i < n; ++i) {
      double z = gauss(rng);
      cols[0][i] = detail::normal_cdf(z);
      for (std::size_t k = 1; k < p; ++k) {
        z = alpha * z + innovation * gauss(rng);
        cols[k][i] = detail::normal_cdf(z);
      }
    }
  }
  return Dataset(std::move(cols), std::vector<double>(n, 0.0));
}

// Common threshold tau with P(union of rectangles) = coverage.
inline double solve_threshold(std::size_t K, std::size_t L, std::size_t overlap, double coverage) {
  if (K < 1 || L < 1 || K > 20) throw ValidationError("threshold solve needs 1 <= K <= 20 and L >= 1");
  if (K > 1 && overlap >= L) throw ValidationError("overlap must be smaller than L");
  if (!(coverage > 0.0 && coverage < 1.0)) throw ValidationError("coverage must lie in (0,1)");
  double lo = 0.0;
  double hi = 1.0;
  double mid = 0.5;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double err = detail::union_probability(K, L, overlap, mid) - coverage;
    if (std::abs(err) <= 1e-12) break;
    (err < 0.0 ? lo : hi) = mid;
  }
  if (!(mid > 0.0 && mid < 1.0)) throw ValidationError("no threshold in (0,1) reaches the requested coverage");
  return mid;
}

// Var(signal) of the noise-free response. Exact for independent features
// (terms are indicator products, E[I_a I_b] is the activation probability
// of S_a union S_b); Monte-Carlo with a fixed seed under correlation.
inline double signal_variance(const LssSpec& spec) {
  const auto& terms = spec.interactions;
  if (spec.correlation_alpha == 0.0) {
    double var = 0.0;
    for (std::size_t a = 0; a < terms.size(); ++a) {
      const double qa = spec.activation_probability(terms[a].signed_set);
      for (std::size_t b = 0; b < terms.size(); ++b) {
        const double qb = spec.activation_probability(terms[b].signed_set);
        const auto joint_set = terms[a].signed_set.united(terms[b].signed_set);
        const double qab = joint_set.sign_consistent() ? spec.activation_probability(joint_set) : 0.0;
        var += terms[a].beta * terms[b].beta * (qab - qa * qb);
      }
    }
    return var;
  }
  constexpr std::size_t draws = 200000;
  const std::size_t p = std::max<std::size_t>(1, spec.max_feature());
  const auto x = gen_features(draws, p, spec.correlation_alpha, 0x5eedULL);
  double mean = 0.0;
  double m2 = 0.0;
  std::vector<double> point(p);
  for (std::size_t i = 0; i < draws; ++i) {
    for (std::size_t k = 0; k < p; ++k) point[k] = x.x(i, k);
    const double v = response_mean(spec, point);
    const double d = v - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v - mean);
  }
  return m2 / static_cast<double>(draws);
}

// Noise scale giving Var(signal)/Var(noise) = snr. Laplace: 2b^2 = sigma^2.
// Cauchy has no variance; its scale is set to sigma.
inline double snr_to_sigma(const LssSpec& spec, double snr) {
  if (!(snr > 0.0)) throw ValidationError("snr must be positive");
  if (std::isinf(snr)) return 0.0;
  const double sigma = std::sqrt(signal_variance(spec) / snr);
  switch (spec.noise.family) {
    case NoiseFamily::Laplace: return sigma / std::numbers::sqrt2;
    case NoiseFamily::Gaussian:
    case NoiseFamily::Cauchy: return sigma;
  }
  return sigma;
}

// Spec of a scenario cell (noise scale left at 0).
inline LssSpec scenario_spec(const ScenarioConfig& c) {
  validate_scenario(c);
  const double tau = solve_threshold(c.K, c.L, c.overlap, c.coverage);
  LssSpec spec;
  spec.correlation_alpha = c.correlation_alpha;
  spec.allow_overlap = c.overlap > 0;
  spec.noise.family = c.noise_family;
  for (std::size_t j = 0; j < c.K; ++j) {
    std::vector<SignedFeature> items;
    for (auto col : detail::interaction_columns(j, c.L, c.overlap)) {
      items.push_back(minus(col + 1));
      spec.thresholds[col + 1] = tau;
    }
    spec.interactions.push_back({SignedSet(std::move(items)), 1.0});
  }
  return spec;
}

inline double sample_noise(NoiseFamily family, double scale, std::mt19937_64& rng) {
  if (scale == 0.0) return 0.0;
  switch (family) {
    case NoiseFamily::Gaussian: return std::normal_distribution<double>(0.0, scale)(rng);
    case NoiseFamily::Laplace: {
      const double e1 = std::exponential_distribution<double>(1.0)(rng);
      const double e2 = std::exponential_distribution<double>(1.0)(rng);
      return scale * (e1 - e2);
    }
    case NoiseFamily::Cauchy: return std::cauchy_distribution<double>(0.0, scale)(rng);
  }
  return 0.0;
}

// Features, responses and noise drawn for an explicit spec.
inline Dataset sample_dataset(const LssSpec& spec, std::size_t n, std::size_t p, std::uint64_t seed) {
  if (p < spec.max_feature()) throw ValidationError("p is smaller than the largest feature in the spec");
  const auto features = gen_features(n, p, spec.correlation_alpha, seed);
  std::mt19937_64 noise_rng(derive_seed(seed, 1));
  std::vector<std::vector<double>> cols(p);
  for (std::size_t k = 0; k < p; ++k) {
    const auto c = features.column(k);
    cols[k].assign(c.begin(), c.end());
  }
  std::vector<double> y(n);
  std::vector<double> point(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < p; ++k) point[k] = cols[k][i];
    y[i] = response_mean(spec, point) + sample_noise(spec.noise.family, spec.noise.scale, noise_rng);
  }
  return Dataset(std::move(cols), std::move(y));
}

inline std::pair<Dataset, LssSpec> gen_dataset(const ScenarioConfig& c) {
  auto spec = scenario_spec(c);
  spec.noise.scale = snr_to_sigma(spec, c.snr);
  auto data = sample_dataset(spec, c.n, c.p, c.seed);
  return {std::move(data), std::move(spec)};
}

}  // namespace lss
