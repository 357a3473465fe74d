#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "tensormc/kernels.hpp"
#include "tensormc/tensor.hpp"

namespace tmc_test {

// Random tensor with distinct coordinates and values in [0.5, 2) so relative
// comparisons stay well conditioned.
inline tmc::SparseTensorCOO random_tensor(std::mt19937_64& rng, int num_modes, tmc::Index max_dim,
                                          tmc::Index max_nnz) {
  tmc::SparseTensorCOO t;
  t.num_modes = num_modes;
  t.mode_lengths.resize(num_modes);
  std::uniform_int_distribution<tmc::Index> dim_dist(1, max_dim);
  for (auto& len : t.mode_lengths) len = dim_dist(rng);

  tmc::Index dense = 1;
  for (const auto len : t.mode_lengths) dense *= len;
  std::uniform_int_distribution<tmc::Index> nnz_dist(1, std::min(max_nnz, dense));
  const tmc::Index want = nnz_dist(rng);

  std::set<std::vector<tmc::Index>> seen;
  std::uniform_real_distribution<double> val_dist(0.5, 2.0);
  while (tmc::Index(seen.size()) < want) {
    std::vector<tmc::Index> c(num_modes);
    for (int m = 0; m < num_modes; ++m)
      c[m] = std::uniform_int_distribution<tmc::Index>(0, t.mode_lengths[m] - 1)(rng);
    if (!seen.insert(c).second) continue;
    t.coords.insert(t.coords.end(), c.begin(), c.end());
    t.values.push_back(val_dist(rng));
  }
  return t;
}

inline tmc::SparseTensorCOO make_tensor(std::vector<tmc::Index> dims,
                                        std::vector<std::vector<tmc::Index>> coords,
                                        std::vector<double> values) {
  tmc::SparseTensorCOO t;
  t.num_modes = int(dims.size());
  t.mode_lengths = std::move(dims);
  for (const auto& c : coords) t.coords.insert(t.coords.end(), c.begin(), c.end());
  t.values = std::move(values);
  return t;
}

inline double max_rel_err(const tmc::FactorMatrix& a, const tmc::FactorMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), 1e-300});
    worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

}  // namespace tmc_test
