#pragma once

// Tabular chain (x, x') -> (x, y') -> z used by the sample-complexity
// counting experiment. The only randomness is the start draw of (x, x');
// afterwards y' = y_map(x') is deterministic and z = z_map(x, y') is a fixed
// table, so two samples of the same start cell always yield the same z.
// y' reads x' alone, which makes y' independent of x given x' by construction.

#include <cstdint>
#include <random>
#include <vector>

namespace himo {

struct ChainSample {
  int x = 0;
  int x_prime = 0;
  int y_prime = 0;
  double z = 0.0;
};

class ChainInstance {
 public:
  // y_map defaults to parity of x'; z table cells are drawn once from
  // N(0, 1). With noiseless = false, each sample adds fresh N(0, 1)
  // observation noise to z (the counting experiment uses noiseless).
  ChainInstance(std::size_t n, std::size_t m, std::uint64_t seed, bool noiseless = true);

  ChainSample sample(std::mt19937_64& rng) const;
  // Deterministic evaluation of one start cell (no observation noise).
  ChainSample at(int x, int x_prime) const;

  std::size_t n_x() const { return n_; }
  std::size_t n_x_prime() const { return m_; }
  int y_of(int x_prime) const { return y_map_[static_cast<std::size_t>(x_prime)]; }
  double z_of(int x, int y_prime) const {
    return z_map_[static_cast<std::size_t>(x) * 2 + static_cast<std::size_t>(y_prime)];
  }
  // True start-state value: E[z | x] under the uniform start distribution.
  double true_value(int x) const;

 private:
  std::size_t n_, m_;
  bool noiseless_;
  std::vector<int> y_map_;     // [m], values in {0, 1}
  std::vector<double> z_map_;  // [n x 2]
};

}  // namespace himo
