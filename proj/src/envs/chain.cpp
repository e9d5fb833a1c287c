#include "himo/envs/chain.hpp"

#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

ChainInstance::ChainInstance(std::size_t n, std::size_t m, std::uint64_t seed, bool noiseless)
    : n_(n), m_(m), noiseless_(noiseless) {
  if (n == 0 || m == 0) throw std::invalid_argument("chain: n and m must be positive");
  std::mt19937_64 rng(seed);
  y_map_.resize(m);
  for (std::size_t j = 0; j < m; ++j) y_map_[j] = static_cast<int>(j % 2);
  z_map_.resize(n * 2);
  for (auto& z : z_map_) z = sample_gauss(rng);
}

ChainSample ChainInstance::at(int x, int x_prime) const {
  if (x < 0 || static_cast<std::size_t>(x) >= n_ || x_prime < 0 ||
      static_cast<std::size_t>(x_prime) >= m_)
    throw std::out_of_range("chain: start cell out of range");
  ChainSample s;
  s.x = x;
  s.x_prime = x_prime;
  s.y_prime = y_map_[static_cast<std::size_t>(x_prime)];
  s.z = z_of(s.x, s.y_prime);
  return s;
}

ChainSample ChainInstance::sample(std::mt19937_64& rng) const {
  const auto cell = sample_index(rng, static_cast<std::uint64_t>(n_ * m_));
  ChainSample s = at(static_cast<int>(cell / m_), static_cast<int>(cell % m_));
  if (!noiseless_) s.z += sample_gauss(rng);
  return s;
}

double ChainInstance::true_value(int x) const {
  if (x < 0 || static_cast<std::size_t>(x) >= n_)
    throw std::out_of_range("chain: x out of range");
  double acc = 0.0;
  for (std::size_t j = 0; j < m_; ++j) acc += z_of(x, y_map_[j]);
  return acc / static_cast<double>(m_);
}

}  // namespace himo
