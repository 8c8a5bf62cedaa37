#include "atr/rate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atr::rate {

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::WP_UA: return "WP_UA";
    case Scheme::UP_UA: return "UP_UA";
    case Scheme::SP_SA: return "SP_SA";
    case Scheme::DL_PROPOSED: return "DL_PROPOSED";
    case Scheme::DL_NAIVE: return "DL_NAIVE";
  }
  return "UNKNOWN";
}

double mutual_information(const rxq::TransitionMatrix& m) {
  const RMatrix& p = m.p();
  const double px = 1.0 / m.inputs();
  const RVector py = p.colwise().sum().transpose() * px;
  double info = 0.0;
  for (int x = 0; x < m.inputs(); ++x)
    for (int y = 0; y < m.outputs(); ++y) {
      const double v = p(x, y);
      if (v > 0.0) info += px * v * std::log2(v / py(y));
    }
  const double cap = std::log2(static_cast<double>(std::min(m.inputs(), m.outputs())));
  return std::clamp(info, 0.0, cap);
}

double mutual_information(const RMatrix& p) { return mutual_information(rxq::TransitionMatrix(p)); }

namespace {

int levels_for(int n_bits, int cap_bits) { return 1 << std::min(n_bits, cap_bits); }

std::vector<double> scaled(std::vector<double> v, double g) {
  for (double& x : v) x *= g;
  return v;
}

struct Transmitted {
  std::vector<std::vector<double>> points;  // empty for silent subchannels
};

// Subchannels carry a symbol only with both power and bits.
Transmitted transmitted_symbols(const alloc::Allocation& a, std::span<const int> eff_bits,
                                int cap_bits) {
  Transmitted t;
  t.points.resize(a.powers.size());
  for (std::size_t k = 0; k < a.powers.size(); ++k)
    if (eff_bits[k] > 0 && a.powers[k] > 0.0)
      t.points[k] = rxq::pam_constellation(levels_for(eff_bits[k], cap_bits), a.powers[k]);
  return t;
}

double mismatched_rate(int k, double design_gain, const Transmitted& tx, const EstimatedCsi& est) {
  const RMatrix& g = est.effective->g;
  const int s = static_cast<int>(tx.points.size());
  if (g.rows() <= k || g.cols() < s)
    throw std::invalid_argument("mismatched rate: effective channel smaller than the design");
  const auto& pts = tx.points[k];
  if (!(design_gain > 0.0)) return 0.0;

  std::vector<double> gain_row(s);
  for (int j = 0; j < s; ++j) gain_row[j] = g(k, j);
  const std::vector<double> thresholds = scaled(rxq::midpoint_thresholds(pts), design_gain);
  const rxq::InterferenceRow row{gain_row, k, tx.points};

  const double work = rxq::interference_alphabet_size(row) * static_cast<double>(pts.size()) *
                      static_cast<double>(pts.size());
  if (work <= est.enumeration_budget)
    return mutual_information(rxq::transition_matrix_enumerated(pts, thresholds, row, 1.0));
  Rng rng = make_rng(est.seed, {static_cast<std::uint64_t>(k)});
  return mutual_information(
      rxq::transition_matrix_mc(pts, thresholds, row, 1.0, est.mc_samples, rng));
}

RateReport evaluate(const subchan::SubchannelDecomposition& design, const alloc::Allocation& a,
                    std::span<const int> eff_bits, const Csi& csi, int cap_bits) {
  const std::size_t s = design.sigma.size();
  if (a.powers.size() != s || a.adc_bits.size() != s || eff_bits.size() != s)
    throw std::invalid_argument("rate: allocation length differs from subchannel count");

  RateReport r;
  r.per_subchannel_bits.assign(s, 0.0);
  if (csi.is_perfect()) {
    for (std::size_t k = 0; k < s; ++k)
      r.per_subchannel_bits[k] = subchannel_rate(design.sigma[k], a.powers[k], eff_bits[k], cap_bits);
    return r;
  }
  const Transmitted tx = transmitted_symbols(a, eff_bits, cap_bits);
  for (std::size_t k = 0; k < s; ++k)
    if (!tx.points[k].empty())
      r.per_subchannel_bits[k] =
          mismatched_rate(static_cast<int>(k), design.sigma[k], tx, *csi.estimated);
  return r;
}

double sum_bits(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace

double subchannel_rate(double sigma_k, double power_k, int n_bits_k, int cap_bits) {
  if (n_bits_k < 0) throw std::invalid_argument("subchannel_rate: negative bit count");
  if (n_bits_k == 0 || !(sigma_k > 0.0) || !(power_k > 0.0)) return 0.0;
  const auto pts = rxq::pam_constellation(levels_for(n_bits_k, cap_bits), power_k);
  const auto thresholds = scaled(rxq::midpoint_thresholds(pts), sigma_k);
  return mutual_information(rxq::transition_matrix_awgn(pts, thresholds, sigma_k, 1.0));
}

double shannon_capacity(std::span<const double> sigma, double total_power) {
  if (total_power < 0.0) throw std::invalid_argument("shannon_capacity: negative power");
  if (total_power == 0.0) return 0.0;
  std::vector<double> g2(sigma.size());
  bool any = false;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    g2[k] = sigma[k] * sigma[k];
    any = any || g2[k] > 0.0;
  }
  if (!any) return 0.0;
  const auto p = alloc::waterfill(g2, total_power);
  double c = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) c += 0.5 * std::log2(1.0 + g2[k] * p[k]);
  return c;
}

double overhead_scale(double rate, int pilot_len, int coherence_len) {
  if (pilot_len < 0 || pilot_len >= coherence_len)
    throw std::invalid_argument(fmt::format(
        "overhead_scale: need 0 <= pilot_len < coherence_len, got {} / {}", pilot_len, coherence_len));
  return rate * static_cast<double>(coherence_len - pilot_len) / static_cast<double>(coherence_len);
}

RateReport ptp_rate(const subchan::SubchannelDecomposition& design, const alloc::Allocation& a,
                    const Csi& csi, Scheme tag, int cap_bits) {
  RateReport r = evaluate(design, a, a.adc_bits, csi, cap_bits);
  r.scheme_tag = tag;
  const double raw = sum_bits(r.per_subchannel_bits);
  if (csi.is_perfect()) {
    r.total_bps_per_hz = raw;
    r.benchmark_truncated =
        std::min(shannon_capacity(design.sigma, a.total_power), static_cast<double>(a.total_adcs));
  } else {
    const EstimatedCsi& e = *csi.estimated;
    r.scale = overhead_scale(1.0, e.pilot_len, e.coherence_len);
    r.total_bps_per_hz = overhead_scale(raw, e.pilot_len, e.coherence_len);
    r.benchmark_truncated = overhead_scale(
        std::min(shannon_capacity(e.true_sigma, a.total_power), static_cast<double>(a.total_adcs)),
        e.pilot_len, e.coherence_len);
  }
  return r;
}

RateReport dl_user_rate(const subchan::SubchannelDecomposition& design,
                        const alloc::Allocation& a, int n_u, TdmaMode mode, const Csi& csi,
                        int cap_bits) {
  if (n_u < 1) throw std::invalid_argument("dl_user_rate: need at least one user");
  std::vector<int> eff = a.adc_bits;
  if (mode == TdmaMode::Proposed)
    for (int& b : eff) b *= n_u;

  RateReport r = evaluate(design, a, eff, csi, cap_bits);
  r.scheme_tag = mode == TdmaMode::Proposed ? Scheme::DL_PROPOSED : Scheme::DL_NAIVE;
  const double raw = sum_bits(r.per_subchannel_bits) / n_u;
  const std::span<const double> bench_sigma =
      csi.is_perfect() ? std::span<const double>(design.sigma) : csi.estimated->true_sigma;
  const double c_tdma = shannon_capacity(bench_sigma, a.total_power) / n_u;
  const double bench = std::min(c_tdma, static_cast<double>(a.total_adcs));
  if (csi.is_perfect()) {
    r.scale = 1.0 / n_u;
    r.total_bps_per_hz = raw;
    r.benchmark_truncated = bench;
  } else {
    const EstimatedCsi& e = *csi.estimated;
    r.scale = overhead_scale(1.0, e.pilot_len, e.coherence_len) / n_u;
    r.total_bps_per_hz = overhead_scale(raw, e.pilot_len, e.coherence_len);
    r.benchmark_truncated = overhead_scale(bench, e.pilot_len, e.coherence_len);
  }
  return r;
}

}  // namespace atr::rate
