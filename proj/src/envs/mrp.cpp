#include "himo/envs/mrp.hpp"

#include <cmath>
#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

namespace {

std::vector<double> gauss_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * sample_gauss(rng);
  return v;
}

}  // namespace

MrpInstance::MrpInstance(std::size_t D, std::size_t D2, std::size_t mlp_hidden, double noise_std,
                         std::uint64_t seed)
    : D_(D), D2_(D2), noise_std_(noise_std) {
  if (D2 == 0 || D2 >= D) throw std::invalid_argument("mrp: need 0 < D2 < D");
  std::mt19937_64 rng(seed);
  const std::size_t D1 = D - D2;
  W_ = gauss_vector(rng, D2 * D2);
  b_ = gauss_vector(rng, D2);
  // Fan-in-scaled distractor weights keep s1' at O(1) per component.
  w1_ = gauss_vector(rng, D * mlp_hidden, 1.0 / std::sqrt(static_cast<double>(D)));
  b1_ = gauss_vector(rng, mlp_hidden);
  w2_ = gauss_vector(rng, mlp_hidden * D1, 1.0 / std::sqrt(static_cast<double>(mlp_hidden)));
  b2_ = gauss_vector(rng, D1);
}

std::vector<double> MrpInstance::successor(const std::vector<double>& s,
                                           const std::vector<double>& noise) const {
  if (s.size() != D_) throw std::invalid_argument("mrp successor: wrong state dimension");
  const std::size_t D1 = D_ - D2_;
  if (!noise.empty() && noise.size() != D1)
    throw std::invalid_argument("mrp successor: wrong noise dimension");

  std::vector<double> out(D_, 0.0);

  const std::size_t hidden = b1_.size();
  std::vector<double> h(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = b1_[j];
    for (std::size_t i = 0; i < D_; ++i) acc += s[i] * w1_[i * hidden + j];
    h[j] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t j = 0; j < D1; ++j) {
    double acc = b2_[j];
    for (std::size_t i = 0; i < hidden; ++i) acc += h[i] * w2_[i * D1 + j];
    out[j] = acc + (noise.empty() ? 0.0 : noise[j]);
  }

  for (std::size_t j = 0; j < D2_; ++j) {
    double acc = b_[j];
    for (std::size_t i = 0; i < D2_; ++i) acc += s[D1 + i] * W_[j * D2_ + i];
    out[D1 + j] = acc >= 0.0 ? 1.0 : 0.0;
  }
  return out;
}

double MrpInstance::reward_of(const std::vector<double>& s,
                              const std::vector<double>& s_prime) const {
  const std::size_t D1 = D_ - D2_;
  double sum1 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < D1; ++i) sum1 += s[i];
  for (std::size_t i = 0; i < D2_; ++i) sum2 += s_prime[D1 + i];
  return sum1 * sum2 / std::sqrt(static_cast<double>(D_));
}

MrpEpisode MrpInstance::sample(std::mt19937_64& rng) const {
  MrpEpisode ep;
  ep.s = gauss_vector(rng, D_);
  std::vector<double> noise =
      noise_std_ > 0.0 ? gauss_vector(rng, D_ - D2_, noise_std_) : std::vector<double>{};
  ep.s_prime = successor(ep.s, noise);
  ep.reward = reward_of(ep.s, ep.s_prime);
  return ep;
}

MrpDefaults mrp_default_config() { return {}; }

}  // namespace himo
