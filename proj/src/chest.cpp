#include "atr/chest.hpp"

#include "atr/rxq.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace atr::chest {

namespace {

CMatrix dft(int n) {
  CMatrix f(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) f(a, b) = std::polar(norm, 2.0 * kPi * a * b / n);
  return f;
}

double gauss_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

}  // namespace

CMatrix angular_dictionary(const chanmod::ArrayGeometry& geom) {
  if (geom.rows < 1 || geom.cols < 1) throw std::invalid_argument("angular_dictionary: empty array");
  const CMatrix fr = dft(geom.rows);
  const CMatrix fc = dft(geom.cols);
  const int n = geom.size();
  CMatrix a(n, n);
  // Kronecker product F_rows (x) F_cols: element p*cols+q, beam kp*cols+kq.
  for (int p = 0; p < geom.rows; ++p)
    for (int q = 0; q < geom.cols; ++q)
      for (int kp = 0; kp < geom.rows; ++kp)
        for (int kq = 0; kq < geom.cols; ++kq)
          a(p * geom.cols + q, kp * geom.cols + kq) = fr(p, kp) * fc(q, kq);
  return a;
}

AngularDictionaries make_dictionaries(const chanmod::ArrayGeometry& user,
                                      const chanmod::ArrayGeometry& bs) {
  return AngularDictionaries{angular_dictionary(user), angular_dictionary(bs)};
}

CMatrix gen_pilots(int n_t, int n_p, double power, Rng& rng) {
  if (n_t < 1 || n_p < 1) throw std::invalid_argument("gen_pilots: empty pilot block");
  if (!(power >= 0.0)) throw std::invalid_argument("gen_pilots: negative power");
  const double amp = std::sqrt(power / (2.0 * n_t));
  std::uniform_int_distribution<int> coin(0, 1);
  CMatrix x(n_t, n_p);
  for (int c = 0; c < n_p; ++c)
    for (int r = 0; r < n_t; ++r) {
      const double re = coin(rng) ? amp : -amp;
      const double im = coin(rng) ? amp : -amp;
      x(r, c) = {re, im};
    }
  return x;
}

Eigen::MatrixXi quantize_observations(const CMatrix& y, int bits_per_dim, double agc_range) {
  if (bits_per_dim < 1) throw std::invalid_argument("quantize_observations: need >= 1 bit");
  if (!(agc_range > 0.0)) throw std::invalid_argument("quantize_observations: agc_range must be > 0");
  const rxq::QuantizerSpec spec = rxq::QuantizerSpec::uniform(bits_per_dim, agc_range);
  const auto nr = y.rows();
  Eigen::MatrixXi q(2 * nr, y.cols());
  for (Eigen::Index c = 0; c < y.cols(); ++c)
    for (Eigen::Index r = 0; r < nr; ++r) {
      q(r, c) = rxq::sar_quantize(y(r, c).real(), spec);
      q(nr + r, c) = rxq::sar_quantize(y(r, c).imag(), spec);
    }
  return q;
}

CMatrix dequantize_observations(const Eigen::MatrixXi& q, int bits_per_dim, double agc_range) {
  if (q.rows() % 2 != 0) throw std::invalid_argument("dequantize_observations: odd row count");
  const rxq::QuantizerSpec spec = rxq::QuantizerSpec::uniform(bits_per_dim, agc_range);
  const auto& pts = spec.reconstruction_points();
  const auto nr = q.rows() / 2;
  CMatrix y(nr, q.cols());
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    for (Eigen::Index r = 0; r < nr; ++r) y(r, c) = {pts.at(q(r, c)), pts.at(q(nr + r, c))};
  return y;
}

BussgangGain bussgang_uniform(int bits_per_dim, double agc_range, double input_std) {
  if (!(input_std > 0.0)) throw std::invalid_argument("bussgang_uniform: input_std must be > 0");
  const rxq::QuantizerSpec spec = rxq::QuantizerSpec::uniform(bits_per_dim, agc_range);
  const auto& t = spec.thresholds();
  const auto& q = spec.reconstruction_points();
  const double inf = std::numeric_limits<double>::infinity();
  double cross = 0.0;   // E[y Q(y)]
  double second = 0.0;  // E[Q(y)^2]
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double lo = j == 0 ? -inf : t[j - 1] / input_std;
    const double hi = j + 1 == q.size() ? inf : t[j] / input_std;
    cross += q[j] * input_std * (gauss_pdf(lo) - gauss_pdf(hi));
    second += q[j] * q[j] * rxq::normal_interval(lo, hi);
  }
  BussgangGain g;
  g.alpha = cross / (input_std * input_std);
  g.distortion_var = std::max(0.0, second - g.alpha * g.alpha * input_std * input_std);
  return g;
}

AngularEstimate estimate_bussgang_lmmse(const PilotBlock& block, const AngularDictionaries& dicts,
                                        const LmmseOptions& opt) {
  const auto n_t = block.pilots.rows();
  const auto n_p = block.pilots.cols();
  if (n_p < 1) throw std::invalid_argument("estimate_bussgang_lmmse: no pilots");
  if (dicts.tx.rows() != n_t) throw std::invalid_argument("estimate_bussgang_lmmse: tx size mismatch");
  if (!(opt.prior_var > 0.0)) throw std::invalid_argument("estimate_bussgang_lmmse: prior_var must be > 0");

  CMatrix r;
  BussgangGain bg;
  if (block.bits_per_dim == 0) {
    if (!block.unquantized_obs) throw std::invalid_argument("estimate_bussgang_lmmse: missing analog observations");
    r = *block.unquantized_obs;
  } else {
    if (block.quantized_obs.cols() != n_p)
      throw std::invalid_argument("estimate_bussgang_lmmse: observation length mismatch");
    r = dequantize_observations(block.quantized_obs, block.bits_per_dim, block.agc_range);
    // The AGC sets the range from the analog RMS, so the input scale is known.
    if (!(block.agc_loading > 0.0)) throw std::invalid_argument("estimate_bussgang_lmmse: agc_loading must be > 0");
    bg = bussgang_uniform(block.bits_per_dim, block.agc_range, block.agc_range / block.agc_loading);
  }
  if (dicts.rx.rows() != r.rows()) throw std::invalid_argument("estimate_bussgang_lmmse: rx size mismatch");

  // R = alpha * A_r G B + eta with B = A_t^H X; rows of A_r^H R decouple.
  const CMatrix b = dicts.tx.adjoint() * block.pilots;
  CMatrix normal = (bg.alpha * bg.alpha) * (b * b.adjoint());
  const double eff_noise = bg.alpha * bg.alpha * opt.noise_var + 2.0 * bg.distortion_var;
  const double mean_diag = normal.diagonal().real().mean();
  const double lambda = eff_noise / opt.prior_var + opt.ridge * mean_diag;
  normal.diagonal().array() += lambda;

  const CMatrix rhs = bg.alpha * (b * (r.adjoint() * dicts.rx));  // n_t x n_r
  Eigen::LLT<CMatrix> llt(normal);
  if (llt.info() != Eigen::Success) throw std::runtime_error("estimate_bussgang_lmmse: normal matrix not positive definite");
  AngularEstimate est;
  est.g_hat = llt.solve(rhs).adjoint();
  est.h_hat = dicts.rx * est.g_hat * dicts.tx.adjoint();
  return est;
}

double nmse_db(const CMatrix& h_true, const CMatrix& h_hat) {
  const double ref = h_true.squaredNorm();
  if (!(ref > 0.0)) throw std::invalid_argument("nmse_db: reference channel has zero norm");
  const double err = (h_hat - h_true).squaredNorm() / ref;
  if (!(err > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(err));
}

Estimator estimator_from_name(std::string_view name) {
  if (name == "bussgang" || name == "bussgang-lmmse") return Estimator::BussgangLmmse;
  if (name == "gamp" || name == "em-gamp") return Estimator::GampEm;
  throw std::invalid_argument(fmt::format("unknown estimator '{}'", name));
}

std::string_view estimator_name(Estimator e) {
  return e == Estimator::BussgangLmmse ? "bussgang" : "gamp";
}

PilotBlock observe_pilots(const CMatrix& h, const PilotConfig& cfg, Rng& rng) {
  if (cfg.bits_per_dim < 0) throw std::invalid_argument("observe_pilots: negative bit count");
  PilotBlock block;
  block.pilots = gen_pilots(static_cast<int>(h.cols()), cfg.n_p, cfg.power, rng);
  block.bits_per_dim = cfg.bits_per_dim;

  CMatrix y = h * block.pilots;
  if (cfg.noise_var > 0.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(cfg.noise_var / 2.0));
    for (Eigen::Index c = 0; c < y.cols(); ++c)
      for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, c) += cdouble(n(rng), n(rng));
  }
  const double rms = std::sqrt(y.squaredNorm() / (2.0 * static_cast<double>(y.size())));
  block.agc_loading = cfg.agc_loading;
  block.agc_range = cfg.agc_loading * (rms > 0.0 ? rms : 1.0);
  if (cfg.bits_per_dim == 0) {
    block.unquantized_obs = std::move(y);
  } else {
    block.quantized_obs = quantize_observations(y, cfg.bits_per_dim, block.agc_range);
  }
  return block;
}

EstimationResult estimate_channel(const CMatrix& h, double prior_var,
                                  const AngularDictionaries& dicts, const PilotConfig& cfg,
                                  Rng& rng) {
  const PilotBlock block = observe_pilots(h, cfg, rng);
  EstimationResult res;
  if (cfg.estimator == Estimator::GampEm) {
    GampOptions g = cfg.gamp;
    g.noise_var = cfg.noise_var;
    res.estimate = estimate_gamp_em(block, dicts, g, prior_var);
  } else {
    res.estimate = estimate_bussgang_lmmse(block, dicts, LmmseOptions{prior_var, cfg.noise_var});
  }
  res.nmse_db = nmse_db(h, res.estimate.h_hat);
  return res;
}

}  // namespace atr::chest
