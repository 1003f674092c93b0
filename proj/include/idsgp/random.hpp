#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace idsgp {

using Rng = std::mt19937_64;

/// Fisher–Yates permutation of 0..n-1 drawn from `rng`.
inline std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

}  // namespace idsgp
