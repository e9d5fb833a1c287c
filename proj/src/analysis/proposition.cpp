#include "himo/analysis/proposition.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

std::vector<double> least_squares(const std::vector<double>& x, const std::vector<double>& y,
                                  std::size_t rows, std::size_t cols) {
  if (x.size() != rows * cols || y.size() != rows)
    throw std::invalid_argument("least_squares: bad matrix dimensions");
  if (rows < cols) throw std::invalid_argument("least_squares: underdetermined system");

  // normal equations A w = r with A = X^T X, r = X^T y
  std::vector<double> a(cols * cols, 0.0), r(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      r[j] += xi[j] * y[i];
      for (std::size_t k = j; k < cols; ++k) a[j * cols + k] += xi[j] * xi[k];
    }
  }
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t k = 0; k < j; ++k) a[j * cols + k] = a[k * cols + j];

  // Gaussian elimination with partial pivoting
  std::vector<std::size_t> perm(cols);
  for (std::size_t i = 0; i < cols; ++i) perm[i] = i;
  for (std::size_t col = 0; col < cols; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < cols; ++i)
      if (std::fabs(a[perm[i] * cols + col]) > std::fabs(a[perm[pivot] * cols + col])) pivot = i;
    std::swap(perm[col], perm[pivot]);
    const double p = a[perm[col] * cols + col];
    if (std::fabs(p) < 1e-12) throw std::runtime_error("least_squares: singular system");
    for (std::size_t i = col + 1; i < cols; ++i) {
      const double factor = a[perm[i] * cols + col] / p;
      if (factor == 0.0) continue;
      for (std::size_t k = col; k < cols; ++k) a[perm[i] * cols + k] -= factor * a[perm[col] * cols + k];
      r[perm[i]] -= factor * r[perm[col]];
    }
  }
  std::vector<double> w(cols, 0.0);
  for (std::size_t col = cols; col-- > 0;) {
    double acc = r[perm[col]];
    for (std::size_t k = col + 1; k < cols; ++k) acc -= a[perm[col] * cols + k] * w[k];
    w[col] = acc / a[perm[col] * cols + col];
  }
  return w;
}

namespace {

struct FittedInstance {
  std::vector<double> w_v;    // [f_dim + 1]
  std::vector<double> w_psi;  // [f_dim + phi_dim + 1] = (omega1, omega2, b)
};

FittedInstance fit(const PropositionInstance& inst) {
  const std::size_t S = inst.g_return.size();
  const std::size_t p = inst.f_dim, d = inst.phi_dim;

  std::vector<double> xv(S * (p + 1)), xpsi(S * (p + d + 1));
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      xv[i * (p + 1) + j] = inst.f[i][j];
      xpsi[i * (p + d + 1) + j] = inst.f[i][j];
    }
    xv[i * (p + 1) + p] = 1.0;
    for (std::size_t j = 0; j < d; ++j) xpsi[i * (p + d + 1) + p + j] = inst.phi[i][j];
    xpsi[i * (p + d + 1) + p + d] = 1.0;
  }
  FittedInstance out;
  out.w_v = least_squares(xv, inst.g_return, S, p + 1);
  out.w_psi = least_squares(xpsi, inst.g_return, S, p + d + 1);
  return out;
}

struct PointLosses {
  double sq_v, sq_vplus, sq_vm, sq_model;
};

PointLosses point_losses(const PropositionInstance& inst, const FittedInstance& fitted,
                         std::size_t i) {
  const std::size_t p = inst.f_dim, d = inst.phi_dim;
  double v = fitted.w_v[p];
  for (std::size_t j = 0; j < p; ++j) v += fitted.w_v[j] * inst.f[i][j];

  double shared = fitted.w_psi[p + d];
  for (std::size_t j = 0; j < p; ++j) shared += fitted.w_psi[j] * inst.f[i][j];
  double vplus = shared, vm = shared, model = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    vplus += fitted.w_psi[p + j] * inst.phi[i][j];
    vm += fitted.w_psi[p + j] * inst.phi_hat[i][j];
    const double delta = inst.phi_hat[i][j] - inst.phi[i][j];
    model += delta * delta;
  }
  const double g = inst.g_return[i];
  return {(v - g) * (v - g), (vplus - g) * (vplus - g), (vm - g) * (vm - g), model};
}

}  // namespace

PropositionReport proposition_check(const PropositionInstance& inst) {
  const std::size_t S = inst.g_return.size();
  if (S == 0 || inst.f.size() != S || inst.phi.size() != S || inst.phi_hat.size() != S)
    throw std::invalid_argument("proposition_check: inconsistent instance");

  const FittedInstance fitted = fit(inst);

  PropositionReport rep;
  for (std::size_t i = 0; i < S; ++i) {
    const PointLosses pl = point_losses(inst, fitted, i);
    rep.l_v += pl.sq_v;
    rep.l_vplus += pl.sq_vplus;
    rep.l_vm += pl.sq_vm;
    rep.l_model += pl.sq_model;
  }
  const double inv = 1.0 / static_cast<double>(S);
  rep.l_v *= inv;
  rep.l_vplus *= inv;
  rep.l_vm *= inv;
  rep.l_model *= inv;

  for (std::size_t j = 0; j < inst.phi_dim; ++j) {
    const double w = fitted.w_psi[inst.f_dim + j];
    rep.omega2_norm_sq += w * w;
  }

  if (rep.l_v == 0.0) {
    rep.degenerate = true;
    return rep;
  }
  rep.c_ratio = rep.l_vplus / rep.l_v;
  rep.threshold = rep.omega2_norm_sq == 0.0
                      ? std::numeric_limits<double>::infinity()
                      : (1.0 - 2.0 * rep.c_ratio) * rep.l_v / (2.0 * rep.omega2_norm_sq);
  rep.premise_holds = rep.c_ratio < 0.5 && rep.l_model < rep.threshold;
  rep.conclusion_holds = rep.l_vm < rep.l_v;
  return rep;
}

PropositionMcReport proposition_check_mc(const PropositionInstance& inst, std::size_t samples,
                                         std::uint64_t seed) {
  const std::size_t S = inst.g_return.size();
  if (S == 0 || samples == 0)
    throw std::invalid_argument("proposition_check_mc: empty instance or sample budget");
  const FittedInstance fitted = fit(inst);

  std::mt19937_64 rng(seed);
  double sum[4] = {0, 0, 0, 0}, sumsq[4] = {0, 0, 0, 0};
  for (std::size_t it = 0; it < samples; ++it) {
    const std::size_t i = sample_index(rng, S);
    const PointLosses pl = point_losses(inst, fitted, i);
    const double vals[4] = {pl.sq_v, pl.sq_vplus, pl.sq_model, pl.sq_vm};
    for (int j = 0; j < 4; ++j) {
      sum[j] += vals[j];
      sumsq[j] += vals[j] * vals[j];
    }
  }
  const double n = static_cast<double>(samples);
  auto se = [&](int j) {
    const double mean = sum[j] / n;
    const double var = sumsq[j] / n - mean * mean;
    return std::sqrt(std::max(var, 0.0) / n);
  };
  PropositionMcReport r;
  r.samples = samples;
  r.l_v = sum[0] / n;
  r.l_v_se = se(0);
  r.l_vplus = sum[1] / n;
  r.l_vplus_se = se(1);
  r.l_model = sum[2] / n;
  r.l_model_se = se(2);
  r.l_vm = sum[3] / n;
  r.l_vm_se = se(3);
  return r;
}

PropositionInstance random_proposition_instance(std::uint64_t seed, bool force_premise,
                                                std::size_t points) {
  std::mt19937_64 rng(seed);
  PropositionInstance inst;
  const std::size_t p = inst.f_dim, d = inst.phi_dim, S = points;

  // ground-truth generator: G = w1.f + w2.phi + b + noise, with the phi part
  // strong enough that conditioning on phi removes most of the error
  std::vector<double> w1(p), w2(d);
  for (auto& w : w1) w = sample_gauss(rng);
  for (auto& w : w2) w = 1.0 + 0.5 * sample_uniform(rng);  // keep ||w2|| away from 0
  const double b = sample_gauss(rng);
  const double noise = 0.1 + 0.4 * sample_uniform(rng);

  inst.f.assign(S, std::vector<double>(p));
  inst.phi.assign(S, std::vector<double>(d));
  inst.phi_hat.assign(S, std::vector<double>(d));
  inst.g_return.assign(S, 0.0);
  std::vector<std::vector<double>> raw_delta(S, std::vector<double>(d));

  for (std::size_t i = 0; i < S; ++i) {
    double g = b + noise * sample_gauss(rng);
    for (std::size_t j = 0; j < p; ++j) {
      inst.f[i][j] = sample_gauss(rng);
      g += w1[j] * inst.f[i][j];
    }
    for (std::size_t j = 0; j < d; ++j) {
      inst.phi[i][j] = sample_gauss(rng);
      g += w2[j] * inst.phi[i][j];
      raw_delta[i][j] = sample_gauss(rng);
    }
    inst.g_return[i] = g;
  }

  // scale the feature-model error against the fitted premise threshold
  double raw_l_model = 0.0;
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < d; ++j) raw_l_model += raw_delta[i][j] * raw_delta[i][j];
  raw_l_model /= static_cast<double>(S);

  double scale = 0.25;  // fallback when not forcing: moderate model error
  if (force_premise) {
    for (std::size_t i = 0; i < S; ++i) inst.phi_hat[i] = inst.phi[i];
    const PropositionReport base = proposition_check(inst);  // L_model = 0 here
    if (!base.degenerate && base.c_ratio < 0.5 && raw_l_model > 0.0 &&
        std::isfinite(base.threshold)) {
      const double margin = 0.1 + 0.8 * sample_uniform(rng);
      scale = std::sqrt(margin * base.threshold / raw_l_model);
    }
  }
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < d; ++j)
      inst.phi_hat[i][j] = inst.phi[i][j] + scale * raw_delta[i][j];
  return inst;
}

}  // namespace himo
