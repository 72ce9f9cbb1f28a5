#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <lssfind/lssfind.hpp>

namespace lss::testing {

// y = 1(x1 <= 0.5) 1(x2 <= 0.5)
inline LssSpec two_way_spec() {
  LssSpec spec;
  spec.interactions.push_back({SignedSet({minus(1), minus(2)}), 1.0});
  spec.thresholds = {{1, 0.5}, {2, 0.5}};
  return spec;
}

// Small random regression problem with a mix of signal and ties.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coarse(0.3);
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (auto& col : cols) {
    const bool discrete = coarse(rng);
    for (auto& v : col) v = discrete ? std::floor(u(rng) * 4.0) / 4.0 : u(rng);
  }
  std::vector<double> y(n);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (cols[0][i] <= 0.5 ? 1.0 : 0.0) * (p > 1 && cols[1][i] > 0.4 ? 1.0 : 0.0) + noise(rng);
  }
  return Dataset(std::move(cols), std::move(y));
}

inline RfConfig random_config(std::mt19937_64& rng, std::size_t p) {
  RfConfig c;
  c.n_trees = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
  c.mtry = std::uniform_int_distribution<std::size_t>(1, p)(rng);
  c.epsilon = std::uniform_real_distribution<double>(0.0, 0.02)(rng);
  c.min_child_samples = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
  c.bootstrap = std::bernoulli_distribution(0.5)(rng);
  c.min_child_fraction = std::bernoulli_distribution(0.3)(rng) ? 0.1 : 0.0;
  c.seed = rng();
  return c;
}

inline SignedSet random_signed_set(std::mt19937_64& rng, std::size_t p, std::size_t max_size) {
  const std::size_t size = std::uniform_int_distribution<std::size_t>(0, max_size)(rng);
  std::vector<SignedFeature> items;
  for (std::size_t i = 0; i < size; ++i) {
    items.push_back({std::uniform_int_distribution<std::size_t>(1, p)(rng),
                     std::bernoulli_distribution(0.5)(rng) ? Sign::Plus : Sign::Minus});
  }
  return SignedSet(std::move(items));
}

inline double kraft_sum(const Tree& tree) {
  double sum = 0.0;
  for (auto leaf : tree.leaves()) sum += std::ldexp(1.0, -static_cast<int>(tree.nodes[leaf].depth));
  return sum;
}

}  // namespace lss::testing
