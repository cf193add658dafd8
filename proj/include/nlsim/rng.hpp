#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace nlsim {

// Deterministic random stream. Independent substreams are derived by
// hashing (seed, salt) so Monte Carlo trials can run in any order or in
// parallel and still reproduce byte-identical results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(splitmix(seed)) {}

  RngStream derive(std::uint64_t salt) const {
    return RngStream(splitmix(seed_ ^ (0x9e3779b97f4a7c15ULL + salt * 0xbf58476d1ce4e5b9ULL)));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }

  // Categorical draw. Weights need not be normalized exactly; a draw past
  // the accumulated total falls into the last positive-weight bucket.
  std::size_t pick(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::runtime_error("rng: all categorical weights vanish");
    double u = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace nlsim
