#include "atr/chest.hpp"
#include "atr/rxq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace atr::chest {

namespace {

constexpr double kVarFloor = 1e-12;

double phi(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

struct Moments {
  double mean;
  double var;
};

// Posterior of z ~ N(m, vz) given z + N(0, vn) in [lo, hi).
Moments interval_posterior(double m, double vz, double vn, double lo, double hi) {
  const double s = std::sqrt(vz + vn);
  const double a = (lo - m) / s;
  const double b = (hi - m) / s;
  double mass = rxq::normal_interval(a, b);
  double r1;  // (phi(a) - phi(b)) / mass
  double r2;  // (b phi(b) - a phi(a)) / mass
  if (mass > 1e-300) {
    const double pa = phi(a);
    const double pb = phi(b);
    r1 = (pa - pb) / mass;
    r2 = ((std::isinf(b) ? 0.0 : b * pb) - (std::isinf(a) ? 0.0 : a * pa)) / mass;
  } else {
    // Far tail: mass sits on the near edge with vanishing spread.
    r1 = a > 0.0 ? a + 1.0 / a : b + 1.0 / b;
    r2 = 1.0 - r1 * r1;
  }
  const double k = vz / s;
  const double mean = m + k * r1;
  const double var = std::max(kVarFloor, vz - k * k * (r2 + r1 * r1));
  return {mean, var};
}

}  // namespace

AngularEstimate estimate_gamp_em(const PilotBlock& block, const AngularDictionaries& dicts,
                                 const GampOptions& opt, double prior_var) {
  if (opt.max_iter < 1) throw std::invalid_argument("estimate_gamp_em: max_iter must be >= 1");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    throw std::invalid_argument("estimate_gamp_em: damping must be in (0, 1]");
  if (!(prior_var > 0.0)) throw std::invalid_argument("estimate_gamp_em: prior_var must be > 0");
  const auto n_t = block.pilots.rows();
  const auto n_p = block.pilots.cols();
  const auto n_r = dicts.rx.rows();
  if (dicts.tx.rows() != n_t) throw std::invalid_argument("estimate_gamp_em: tx size mismatch");

  const bool analog = block.bits_per_dim == 0;
  CMatrix y_analog;
  Eigen::MatrixXi q;
  std::vector<double> edges;  // bin j spans [edges[j], edges[j + 1])
  if (analog) {
    if (!block.unquantized_obs) throw std::invalid_argument("estimate_gamp_em: missing analog observations");
    y_analog = *block.unquantized_obs;
    if (y_analog.rows() != n_r || y_analog.cols() != n_p)
      throw std::invalid_argument("estimate_gamp_em: observation shape mismatch");
  } else {
    q = block.quantized_obs;
    if (q.rows() != 2 * n_r || q.cols() != n_p)
      throw std::invalid_argument("estimate_gamp_em: observation shape mismatch");
    const auto spec = rxq::QuantizerSpec::uniform(block.bits_per_dim, block.agc_range);
    const double inf = std::numeric_limits<double>::infinity();
    edges.push_back(-inf);
    for (double t : spec.thresholds()) edges.push_back(t);
    edges.push_back(inf);
  }

  // z = A_r G B with B = A_t^H X; x = vec(G) has n_r * n_t entries.
  const CMatrix b = dicts.tx.adjoint() * block.pilots;
  const CMatrix b_h = b.adjoint();
  const CMatrix ar_h = dicts.rx.adjoint();
  const double frob = b.squaredNorm() * static_cast<double>(n_r);
  const double row_gain = frob / static_cast<double>(n_r * n_p);
  const double col_gain = frob / static_cast<double>(n_r * n_t);
  const double vn_dim = std::max(opt.noise_var, kVarFloor) / 2.0;

  double lambda = 0.1;
  double theta = prior_var / lambda;  // active-coefficient variance
  CMatrix x_hat = CMatrix::Zero(n_r, n_t);
  double tau_x = prior_var;
  CMatrix s_hat = CMatrix::Zero(n_r, n_p);
  CMatrix z_hat(n_r, n_p);
  CMatrix pi_post(n_r, n_t);
  CMatrix gamma(n_r, n_t);
  RMatrix nu(n_r, n_t);

  AngularEstimate est;
  est.converged = false;
  CMatrix last_good = x_hat;
  for (int it = 0; it < opt.max_iter; ++it) {
    // Output side.
    const double tau_p = std::max(row_gain * tau_x, kVarFloor);
    const CMatrix p_hat = dicts.rx * x_hat * b - tau_p * s_hat;
    double tau_z_sum = 0.0;
    for (Eigen::Index c = 0; c < n_p; ++c)
      for (Eigen::Index r = 0; r < n_r; ++r) {
        const cdouble p = p_hat(r, c);
        if (analog) {
          const double g = tau_p / (tau_p + 2.0 * vn_dim);
          z_hat(r, c) = p + g * (y_analog(r, c) - p);
          tau_z_sum += g * 2.0 * vn_dim;
        } else {
          const int jr = q(r, c);
          const int ji = q(n_r + r, c);
          const Moments mr = interval_posterior(p.real(), tau_p / 2.0, vn_dim, edges[jr], edges[jr + 1]);
          const Moments mi = interval_posterior(p.imag(), tau_p / 2.0, vn_dim, edges[ji], edges[ji + 1]);
          z_hat(r, c) = {mr.mean, mi.mean};
          tau_z_sum += mr.var + mi.var;
        }
      }
    const double tau_z = tau_z_sum / static_cast<double>(n_r * n_p);
    const CMatrix s_new = (z_hat - p_hat) / tau_p;
    const double tau_s = std::max((1.0 - tau_z / tau_p) / tau_p, kVarFloor);
    s_hat = opt.damping * s_new + (1.0 - opt.damping) * s_hat;

    // Input side.
    const double tau_r = 1.0 / (col_gain * tau_s);
    const CMatrix r_hat = x_hat + tau_r * (ar_h * s_hat * b_h);
    CMatrix x_new(n_r, n_t);
    double var_sum = 0.0;
    for (Eigen::Index c = 0; c < n_t; ++c)
      for (Eigen::Index r = 0; r < n_r; ++r) {
        const double mag2 = std::norm(r_hat(r, c));
        const double llr = mag2 / tau_r - mag2 / (theta + tau_r) - std::log((theta + tau_r) / tau_r);
        const double pi = 1.0 / (1.0 + (1.0 - lambda) / lambda * std::exp(-std::min(llr, 700.0)));
        const cdouble g = theta / (theta + tau_r) * r_hat(r, c);
        const double v = theta * tau_r / (theta + tau_r);
        pi_post(r, c) = pi;
        gamma(r, c) = g;
        nu(r, c) = v;
        x_new(r, c) = pi * g;
        var_sum += pi * (std::norm(g) + v) - std::norm(pi * g);
      }
    const double tau_x_new = std::max(var_sum / static_cast<double>(n_r * n_t), kVarFloor);

    if (!x_new.allFinite() || !std::isfinite(tau_x_new)) break;
    const CMatrix x_damped = opt.damping * x_new + (1.0 - opt.damping) * x_hat;
    const double change = (x_damped - x_hat).norm() / std::max(x_damped.norm(), 1e-300);
    x_hat = x_damped;
    tau_x = opt.damping * tau_x_new + (1.0 - opt.damping) * tau_x;
    last_good = x_hat;

    if (opt.em_every > 0 && (it + 1) % opt.em_every == 0) {
      const double pi_sum = pi_post.real().sum();
      const double n = static_cast<double>(n_r * n_t);
      lambda = std::clamp(pi_sum / n, 1.0 / n, 1.0 - 1e-9);
      double num = 0.0;
      for (Eigen::Index c = 0; c < n_t; ++c)
        for (Eigen::Index r = 0; r < n_r; ++r)
          num += pi_post(r, c).real() * (std::norm(gamma(r, c)) + nu(r, c));
      if (pi_sum > 0.0) theta = std::max(num / pi_sum, kVarFloor);
    }
    if (it > 0 && change < opt.tolerance) {
      est.converged = true;
      break;
    }
  }

  est.g_hat = last_good;
  est.h_hat = dicts.rx * est.g_hat * dicts.tx.adjoint();
  return est;
}

}  // namespace atr::chest
