#pragma once

#include "deepida/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace deepida {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed from a parent seed and a path of integer tags, independent of
/// any scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = normal(rng);
  return out;
}

inline Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = dist(rng);
  return out;
}

}  // namespace deepida
