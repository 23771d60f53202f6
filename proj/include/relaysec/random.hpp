#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "relaysec/linalg.hpp"

namespace relaysec {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates neighbouring seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (root, stream tag, index).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t index) {
  return mix_seed(mix_seed(mix_seed(root) ^ stream) ^ index);
}

/// rows x cols matrix of i.i.d. CN(0, variance) entries.
inline CMat complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                           double variance = 1.0) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
  CMat out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) = cplx(re, im);
    }
  }
  return out;
}

}  // namespace relaysec
