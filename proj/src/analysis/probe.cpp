#include "himo/analysis/probe.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

double logistic_xent(double logit, int label) {
  const double z = logit;
  return std::max(z, 0.0) - z * static_cast<double>(label) + std::log1p(std::exp(-std::fabs(z)));
}

namespace {

constexpr double kLn2 = 0.69314718055994530942;

double mean_xent(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                 const std::vector<std::size_t>& idx, const std::vector<double>& w, double b) {
  double acc = 0.0;
  for (const std::size_t i : idx) {
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[i][j];
    acc += logistic_xent(z, y[i]);
  }
  return acc / static_cast<double>(idx.size());
}

}  // namespace

ProbeReport probe_fit(const std::vector<std::vector<double>>& features,
                      const std::vector<int>& labels, std::uint64_t seed) {
  const std::size_t n = features.size();
  if (n < 200) throw std::invalid_argument("probe_fit: need at least 200 samples");
  if (labels.size() != n) throw std::invalid_argument("probe_fit: label count mismatch");
  const std::size_t dim = features[0].size();
  for (const auto& row : features)
    if (row.size() != dim) throw std::invalid_argument("probe_fit: ragged feature rows");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = sample_index(rng, i + 1);
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train = (n * 7) / 10;
  std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test(order.begin() + n_train, order.end());

  ProbeReport rep;
  rep.n_train = train.size();
  rep.n_test = test.size();

  auto single_class = [&](const std::vector<std::size_t>& idx) {
    const int first = labels[idx[0]];
    for (const std::size_t i : idx)
      if (labels[i] != first) return false;
    return true;
  };
  if (single_class(train) || single_class(test)) {
    rep.degenerate = true;
    rep.train_xent = kLn2;
    rep.test_xent = kLn2;
    return rep;
  }

  // full-batch Adam on (w, b) with light L2 to keep separable fits bounded
  std::vector<double> w(dim, 0.0), m(dim, 0.0), v(dim, 0.0);
  double b = 0.0, mb = 0.0, vb = 0.0;
  constexpr double lr = 0.1, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, l2 = 1e-4;
  constexpr int steps = 800;
  const double inv_train = 1.0 / static_cast<double>(train.size());

  for (int step = 1; step <= steps; ++step) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    for (const std::size_t i : train) {
      double z = b;
      for (std::size_t j = 0; j < dim; ++j) z += w[j] * features[i][j];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double diff = (p - static_cast<double>(labels[i])) * inv_train;
      for (std::size_t j = 0; j < dim; ++j) gw[j] += diff * features[i][j];
      gb += diff;
    }
    for (std::size_t j = 0; j < dim; ++j) gw[j] += l2 * w[j];

    const double bc1 = 1.0 - std::pow(beta1, step), bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t j = 0; j < dim; ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * gw[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * gw[j] * gw[j];
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
    mb = beta1 * mb + (1.0 - beta1) * gb;
    vb = beta2 * vb + (1.0 - beta2) * gb * gb;
    b -= lr * (mb / bc1) / (std::sqrt(vb / bc2) + eps);
  }

  rep.train_xent = mean_xent(features, labels, train, w, b);
  rep.test_xent = mean_xent(features, labels, test, w, b);
  return rep;
}

}  // namespace himo
