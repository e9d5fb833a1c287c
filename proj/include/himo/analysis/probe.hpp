#pragma once

// Logistic probe for measuring what information a feature vector carries
// about a binary label. The probe trains on a 70/30 split of frozen feature
// dumps and reports held-out cross-entropy in nats; it never touches agent
// parameters (inputs are plain value arrays).

#include <cstdint>
#include <vector>

namespace himo {

struct ProbeReport {
  double test_xent = 0.0;   // held-out mean cross-entropy, nats
  double train_xent = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  bool degenerate = false;  // single-class data: xent reported as ln 2
};

// features: one row per sample; labels in {0, 1}; requires >= 200 samples.
ProbeReport probe_fit(const std::vector<std::vector<double>>& features,
                      const std::vector<int>& labels, std::uint64_t seed);

// Stable binary cross-entropy from a logit: max(z,0) - z*y + log1p(exp(-|z|)).
double logistic_xent(double logit, int label);

}  // namespace himo
