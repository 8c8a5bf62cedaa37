#include "atr/rxq.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace atr::rxq {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_interval(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a >= 0.0) return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
  return 1.0 - 0.5 * std::erfc(-a * kInvSqrt2) - 0.5 * std::erfc(b * kInvSqrt2);
}

std::vector<double> pam_constellation(int n_levels, double power) {
  if (n_levels > kMaxPamLevels)
    throw std::invalid_argument(
        fmt::format("pam_constellation: {} levels exceeds the {}-PAM cap", n_levels, kMaxPamLevels));
  if (n_levels < 2 || !is_power_of_two(static_cast<std::size_t>(n_levels)))
    throw std::invalid_argument("pam_constellation: levels must be 2, 4, 8 or 16");
  if (!(power >= 0.0)) throw std::invalid_argument("pam_constellation: negative power");

  // Spacing d with d^2 (M^2 - 1) / 12 = power.
  const double m = n_levels;
  const double d = std::sqrt(12.0 * power / (m * m - 1.0));
  std::vector<double> pts(n_levels);
  for (int i = 0; i < n_levels; ++i) pts[i] = 0.5 * d * (2.0 * i + 1.0 - m);
  return pts;
}

std::vector<double> midpoint_thresholds(std::span<const double> points) {
  std::vector<double> t;
  if (points.size() < 2) return t;
  t.reserve(points.size() - 1);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i] < points[i + 1]))
      throw std::invalid_argument("midpoint_thresholds: points must be strictly increasing");
    t.push_back(0.5 * (points[i] + points[i + 1]));
  }
  return t;
}

QuantizerSpec::QuantizerSpec(std::vector<double> thresholds,
                             std::vector<double> reconstruction_points)
    : thresholds_(std::move(thresholds)), reconstruction_(std::move(reconstruction_points)) {
  const std::size_t levels = reconstruction_.size();
  if (!is_power_of_two(levels) || thresholds_.size() + 1 != levels)
    throw std::invalid_argument("QuantizerSpec: need 2^n levels and 2^n - 1 thresholds");
  n_bits_ = std::countr_zero(levels);
  for (std::size_t i = 0; i + 1 < thresholds_.size(); ++i)
    if (!(thresholds_[i] < thresholds_[i + 1]))
      throw std::invalid_argument("QuantizerSpec: thresholds must be strictly increasing");
  for (std::size_t j = 0; j < levels; ++j)
    if (direct_quantize(reconstruction_[j], thresholds_) != static_cast<int>(j))
      throw std::invalid_argument(
          fmt::format("QuantizerSpec: reconstruction point {} is outside its bin", j));
}

QuantizerSpec QuantizerSpec::uniform(int n_bits, double range) {
  if (n_bits < 0 || n_bits > 30) throw std::invalid_argument("QuantizerSpec::uniform: bad bit count");
  if (!(range > 0.0)) throw std::invalid_argument("QuantizerSpec::uniform: range must be positive");
  const int levels = 1 << n_bits;
  const double step = 2.0 * range / levels;
  std::vector<double> t(levels - 1), r(levels);
  for (int j = 1; j < levels; ++j) t[j - 1] = -range + j * step;
  for (int j = 0; j < levels; ++j) r[j] = -range + (j + 0.5) * step;
  return QuantizerSpec(std::move(t), std::move(r));
}

QuantizerSpec QuantizerSpec::from_constellation(std::span<const double> points) {
  return QuantizerSpec(midpoint_thresholds(points),
                       std::vector<double>(points.begin(), points.end()));
}

bool QuantizerSpec::is_uniform() const {
  if (thresholds_.size() < 3) return true;
  const double step = thresholds_[1] - thresholds_[0];
  for (std::size_t i = 2; i < thresholds_.size(); ++i)
    if (std::abs((thresholds_[i] - thresholds_[i - 1]) - step) > 1e-9 * std::abs(step))
      return false;
  return true;
}

int direct_quantize(double sample, std::span<const double> thresholds) {
  if (std::isnan(sample)) throw std::invalid_argument("quantize: NaN sample");
  return static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), sample) -
                          thresholds.begin());
}

int sar_quantize(double sample, const QuantizerSpec& spec) {
  if (std::isnan(sample)) throw std::invalid_argument("sar_quantize: NaN sample");
  const auto& t = spec.thresholds();
  int lo = 0;
  int hi = spec.n_levels();
  for (int r = 0; r < spec.n_bits(); ++r) {
    const int mid = (lo + hi) / 2;
    if (sample >= t[mid - 1])
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------

void ReceiverConfig::validate() const {
  if (buffer_len < 1) throw std::invalid_argument("ReceiverConfig: buffer_len must be >= 1");
  if (combiner.rows() < 1 || combiner.cols() < 1)
    throw std::invalid_argument("ReceiverConfig: empty combiner");
  const int n_adc = n_adcs();
  if (n_adc < 1) throw std::invalid_argument("ReceiverConfig: no comparators");
  if (static_cast<int>(selection.size()) != buffer_len ||
      static_cast<int>(coefficients.size()) != buffer_len)
    throw std::invalid_argument("ReceiverConfig: need one schedule entry per use in the frame");
  const Eigen::Index width = static_cast<Eigen::Index>(buffer_len) * combined_dim();
  for (std::size_t i = 0; i < selection.size(); ++i) {
    const RMatrix& b = selection[i];
    if (b.rows() != n_adc || b.cols() != width)
      throw std::invalid_argument(fmt::format("ReceiverConfig: B({}) has wrong shape", i));
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      int ones = 0;
      for (Eigen::Index c = 0; c < b.cols(); ++c) {
        if (b(r, c) == 1.0)
          ++ones;
        else if (b(r, c) != 0.0)
          throw std::invalid_argument("ReceiverConfig: selection entries must be 0 or 1");
      }
      if (ones != 1)
        throw std::invalid_argument(
            fmt::format("ReceiverConfig: row {} of B({}) must select exactly one sample", r, i));
    }
  }
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    if (static_cast<int>(coefficients[i].size()) != n_adc)
      throw std::invalid_argument(
          fmt::format("ReceiverConfig: use {} needs one coefficient pair per comparator", i));
    for (const auto& c : coefficients[i]) {
      if (c.left.size() != 0 && c.left.size() != n_adc)
        throw std::invalid_argument("ReceiverConfig: u^l length must equal comparator count");
      if (c.right.size() != 0 && c.right.size() != static_cast<Eigen::Index>(i))
        throw std::invalid_argument("ReceiverConfig: u^r length must equal prior outputs in frame");
    }
  }
}

ReceiverState initial_state(const ReceiverConfig& cfg) {
  cfg.validate();
  const Eigen::Index width = static_cast<Eigen::Index>(cfg.buffer_len) * cfg.combined_dim();
  ReceiverState s;
  s.filling = RVector::Zero(width);
  s.held = RVector::Zero(width);
  s.history.resize(cfg.n_adcs(), 0);
  s.slot_comparisons.assign(width, 0);
  s.slot_bits.assign(width, {});
  return s;
}

StepOutput adaptive_receiver_step(ReceiverState& state, const RVector& y,
                                  const ReceiverConfig& cfg) {
  const int i = state.use_in_frame;
  if (i >= static_cast<int>(cfg.selection.size()) ||
      i >= static_cast<int>(cfg.coefficients.size()))
    throw std::out_of_range(fmt::format("adaptive_receiver_step: no schedule entry for use {}", i));
  if (y.size() != cfg.combiner.cols())
    throw std::invalid_argument("adaptive_receiver_step: input dimension mismatch");

  const int nv = cfg.combined_dim();
  state.filling.segment(static_cast<Eigen::Index>(i) * nv, nv) = cfg.combiner * y;

  const RMatrix& b = cfg.selection[i];
  const RVector w = b * state.held;
  const int n_adc = cfg.n_adcs();

  StepOutput out;
  out.adc.resize(n_adc);
  out.held_frame = state.held_valid ? state.frames_completed - 1 : -1;
  for (int k = 0; k < n_adc; ++k) {
    const ThresholdCoefficients& c = cfg.coefficients[i][k];
    double adaptive = 0.0;
    if (c.left.size() != 0 && c.right.size() != 0)
      adaptive = c.left.dot(state.history * c.right);
    out.adc(k) = (w(k) + adaptive) + cfg.fixed_thresholds(k) >= 0.0 ? 1.0 : -1.0;
  }

  if (state.held_valid) {
    for (int k = 0; k < n_adc; ++k) {
      Eigen::Index slot = 0;
      b.row(k).maxCoeff(&slot);
      ++state.slot_comparisons[slot];
      state.slot_bits[slot].push_back(static_cast<int>(out.adc(k)));
    }
  }

  state.history.conservativeResize(Eigen::NoChange, i + 1);
  state.history.col(i) = out.adc;

  if (++state.use_in_frame == cfg.buffer_len) {
    state.held = state.filling;
    state.filling.setZero();
    if (state.held_valid) {
      state.last_slot_comparisons = state.slot_comparisons;
      state.last_slot_bits = state.slot_bits;
    }
    state.held_valid = true;
    ++state.frames_completed;
    state.use_in_frame = 0;
    state.history.resize(n_adc, 0);
    std::fill(state.slot_comparisons.begin(), state.slot_comparisons.end(), 0);
    for (auto& bits : state.slot_bits) bits.clear();
  }
  return out;
}

ReceiverConfig sar_receiver(const QuantizerSpec& spec, SarLayout layout) {
  const int n = spec.n_bits();
  if (n < 1) throw std::invalid_argument("sar_receiver: need at least one bit");
  if (!spec.is_uniform())
    throw std::invalid_argument("sar_receiver: linear threshold updates need a uniform quantizer");
  const auto& t = spec.thresholds();
  const double centre = t[t.size() / 2];
  const double step = t.size() > 1 ? t[1] - t[0] : 0.0;

  const int n_adc = layout == SarLayout::Pipelined ? n : 1;
  ReceiverConfig cfg;
  cfg.combiner = RMatrix::Ones(1, 1);
  cfg.buffer_len = n;
  cfg.fixed_thresholds = RVector::Constant(n_adc, -centre);
  for (int i = 0; i < n; ++i) {
    RMatrix b = RMatrix::Zero(n_adc, n);
    for (int k = 0; k < n_adc; ++k) b(k, layout == SarLayout::Pipelined ? k : 0) = 1.0;
    cfg.selection.push_back(std::move(b));

    // Comparison i subtracts step * 2^(n-2-r) times each earlier output r.
    RVector right(i);
    for (int r = 0; r < i; ++r) right(r) = -step * std::ldexp(1.0, n - 2 - r);
    std::vector<ThresholdCoefficients> per_adc;
    for (int k = 0; k < n_adc; ++k) {
      RVector left = RVector::Zero(n_adc);
      left(k) = 1.0;
      per_adc.push_back({std::move(left), right});
    }
    cfg.coefficients.push_back(std::move(per_adc));
  }
  cfg.validate();
  return cfg;
}

int decode_sar_bits(std::span<const int> bits) {
  int bin = 0;
  for (int b : bits) bin = (bin << 1) | (b > 0 ? 1 : 0);
  return bin;
}

// ---------------------------------------------------------------------------

TransitionMatrix::TransitionMatrix(RMatrix p, double row_tolerance) : p_(std::move(p)) {
  if (p_.rows() < 1 || p_.cols() < 1) throw std::invalid_argument("TransitionMatrix: empty");
  if (!p_.allFinite()) throw std::invalid_argument("TransitionMatrix: non-finite entry");
  if (p_.minCoeff() < -row_tolerance || p_.maxCoeff() > 1.0 + row_tolerance)
    throw std::invalid_argument("TransitionMatrix: entries must lie in [0, 1]");
  for (Eigen::Index r = 0; r < p_.rows(); ++r)
    if (std::abs(p_.row(r).sum() - 1.0) > row_tolerance)
      throw std::invalid_argument(fmt::format("TransitionMatrix: row {} does not sum to 1", r));
  p_ = p_.cwiseMax(0.0).cwiseMin(1.0);
}

void write_csv(const TransitionMatrix& m, std::ostream& os) {
  os << "input";
  for (int y = 0; y < m.outputs(); ++y) os << ",y" << y;
  os << '\n';
  for (int x = 0; x < m.inputs(); ++x) {
    os << x;
    for (int y = 0; y < m.outputs(); ++y) os << ',' << fmt::format("{}", m(x, y));
    os << '\n';
  }
}

TransitionMatrix transition_matrix_awgn(std::span<const double> points,
                                        std::span<const double> thresholds, double gain,
                                        double noise_std) {
  if (!(noise_std > 0.0)) throw std::invalid_argument("transition_matrix_awgn: noise_std must be > 0");
  if (points.empty()) throw std::invalid_argument("transition_matrix_awgn: no input points");
  const auto n_out = static_cast<Eigen::Index>(thresholds.size() + 1);
  RMatrix p(static_cast<Eigen::Index>(points.size()), n_out);
  for (std::size_t x = 0; x < points.size(); ++x) {
    const double mean = gain * points[x];
    for (Eigen::Index j = 0; j < n_out; ++j) {
      const double lo = j == 0 ? -kInf : (thresholds[j - 1] - mean) / noise_std;
      const double hi = j + 1 == n_out ? kInf : (thresholds[j] - mean) / noise_std;
      p(static_cast<Eigen::Index>(x), j) = normal_interval(lo, hi);
    }
  }
  return TransitionMatrix(std::move(p));
}

namespace {

struct Interferer {
  std::vector<double> contribution;  // gain * point
};

std::vector<Interferer> active_interferers(const InterferenceRow& row) {
  if (row.gain_row.size() != row.interference_points.size())
    throw std::invalid_argument("interference row: gains and point lists differ in length");
  if (row.self_index < 0 || row.self_index >= static_cast<int>(row.gain_row.size()))
    throw std::invalid_argument("interference row: self index out of range");
  std::vector<Interferer> out;
  for (std::size_t j = 0; j < row.gain_row.size(); ++j) {
    if (static_cast<int>(j) == row.self_index) continue;
    const auto& pts = row.interference_points[j];
    if (pts.empty() || row.gain_row[j] == 0.0) continue;
    Interferer it;
    for (double x : pts) it.contribution.push_back(row.gain_row[j] * x);
    out.push_back(std::move(it));
  }
  return out;
}

// Bin lookup; O(1) for uniformly spaced thresholds, exact tie handling either way.
class Binner {
 public:
  explicit Binner(std::span<const double> t) : t_(t) {
    const std::size_t n = t.size();
    uniform_ = n >= 2;
    if (uniform_) {
      step_ = (t[n - 1] - t[0]) / static_cast<double>(n - 1);
      for (std::size_t i = 1; i < n && uniform_; ++i)
        uniform_ = std::abs((t[i] - t[i - 1]) - step_) <= 1e-9 * std::abs(step_);
      uniform_ = uniform_ && step_ > 0.0;
      if (uniform_) inv_step_ = 1.0 / step_;
    }
  }

  int operator()(double v) const {
    const int n = static_cast<int>(t_.size());
    if (!uniform_) return static_cast<int>(std::upper_bound(t_.begin(), t_.end(), v) - t_.begin());
    const double pos = (v - t_[0]) * inv_step_;
    int bin;
    if (pos < 0.0)
      bin = 0;
    else if (pos >= n)
      bin = n;
    else
      bin = static_cast<int>(pos) + 1;
    while (bin > 0 && v < t_[bin - 1]) --bin;
    while (bin < n && v >= t_[bin]) ++bin;
    return bin;
  }

 private:
  std::span<const double> t_;
  bool uniform_ = false;
  double step_ = 0.0;
  double inv_step_ = 0.0;
};

}  // namespace

double interference_alphabet_size(const InterferenceRow& row) {
  double combos = 1.0;
  for (const auto& it : active_interferers(row)) combos *= static_cast<double>(it.contribution.size());
  return combos;
}

TransitionMatrix transition_matrix_mc(std::span<const double> points,
                                      std::span<const double> thresholds,
                                      const InterferenceRow& row, double noise_std,
                                      long n_samples, Rng& rng) {
  if (n_samples < kMinMcSamples)
    throw std::invalid_argument(
        fmt::format("transition_matrix_mc: need at least {} samples", kMinMcSamples));
  if (!(noise_std > 0.0)) throw std::invalid_argument("transition_matrix_mc: noise_std must be > 0");
  if (points.empty()) throw std::invalid_argument("transition_matrix_mc: no input points");

  const std::vector<Interferer> interferers = active_interferers(row);
  const double self_gain = row.gain_row[row.self_index];
  const int n_in = static_cast<int>(points.size());
  const int n_out = static_cast<int>(thresholds.size()) + 1;
  std::vector<double> means(n_in);
  for (int x = 0; x < n_in; ++x) means[x] = self_gain * points[x];

  // Power-of-two alphabets: slice all symbol indices out of one 64-bit draw.
  bool sliced = true;
  int total_bits = 0;
  std::vector<int> widths;
  for (const auto& it : interferers) {
    const std::size_t m = it.contribution.size();
    if (!is_power_of_two(m)) sliced = false;
    const int w = std::countr_zero(m);
    widths.push_back(w);
    total_bits += w;
  }
  sliced = sliced && total_bits <= 64;

  std::vector<std::uniform_int_distribution<std::size_t>> pickers;
  for (const auto& it : interferers) pickers.emplace_back(0, it.contribution.size() - 1);
  std::normal_distribution<double> noise(0.0, noise_std);
  const Binner bin(thresholds);

  // Common random numbers: one noise-plus-interference shift per sample,
  // shared by every input row.
  std::vector<double> shift(static_cast<std::size_t>(n_samples));
  for (long s = 0; s < n_samples; ++s) {
    double v = noise(rng);
    if (sliced) {
      std::uint64_t bits = interferers.empty() ? 0 : rng();
      for (std::size_t j = 0; j < interferers.size(); ++j) {
        const std::uint64_t mask = (std::uint64_t{1} << widths[j]) - 1;
        v += interferers[j].contribution[bits & mask];
        bits >>= widths[j];
      }
    } else {
      for (std::size_t j = 0; j < interferers.size(); ++j)
        v += interferers[j].contribution[pickers[j](rng)];
    }
    shift[static_cast<std::size_t>(s)] = v;
  }

  // Every row shares the shift, so locate each shift once among the merged
  // decision boundaries threshold - mean and map interval counts to rows.
  struct Boundary {
    double at;
    int row;
  };
  std::vector<Boundary> bounds;
  bounds.reserve(static_cast<std::size_t>(n_in) * thresholds.size());
  for (int x = 0; x < n_in; ++x)
    for (double t : thresholds) bounds.push_back({t - means[x], x});
  std::sort(bounds.begin(), bounds.end(),
            [](const Boundary& l, const Boundary& r) { return l.at < r.at; });
  std::vector<double> at(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) at[i] = bounds[i].at;

  std::vector<long> counts(static_cast<std::size_t>(n_in) * n_out, 0);
  std::vector<long> interval(bounds.size() + 1, 0);
  for (double v : shift) {
    // Branchless count of boundaries <= v.
    std::size_t k = 0;
    if (!at.empty()) {
      const double* base = at.data();
      std::size_t len = at.size();
      while (len > 1) {
        const std::size_t half = len / 2;
        base = base[half] <= v ? base + half : base;
        len -= half;
      }
      k = static_cast<std::size_t>(base - at.data()) + (*base <= v ? 1 : 0);
    }
    const double slack = 1e-9 * (1.0 + std::abs(v));
    const bool near = (k > 0 && v - at[k - 1] < slack) || (k < at.size() && at[k] - v < slack);
    if (near) {
      for (int x = 0; x < n_in; ++x) ++counts[static_cast<std::size_t>(x) * n_out + bin(means[x] + v)];
    } else {
      ++interval[k];
    }
  }
  std::vector<int> level(n_in, 0);
  for (std::size_t k = 0; k <= bounds.size(); ++k) {
    if (k > 0) ++level[bounds[k - 1].row];
    if (interval[k] == 0) continue;
    for (int x = 0; x < n_in; ++x) counts[static_cast<std::size_t>(x) * n_out + level[x]] += interval[k];
  }

  RMatrix p(n_in, n_out);
  const double inv = 1.0 / static_cast<double>(n_samples);
  for (int x = 0; x < n_in; ++x)
    for (int y = 0; y < n_out; ++y) p(x, y) = counts[static_cast<std::size_t>(x) * n_out + y] * inv;
  return TransitionMatrix(std::move(p));
}

TransitionMatrix transition_matrix_enumerated(std::span<const double> points,
                                              std::span<const double> thresholds,
                                              const InterferenceRow& row, double noise_std) {
  if (!(noise_std > 0.0))
    throw std::invalid_argument("transition_matrix_enumerated: noise_std must be > 0");
  if (points.empty()) throw std::invalid_argument("transition_matrix_enumerated: no input points");

  const std::vector<Interferer> interferers = active_interferers(row);
  const double self_gain = row.gain_row[row.self_index];
  const auto n_in = static_cast<Eigen::Index>(points.size());
  const auto n_out = static_cast<Eigen::Index>(thresholds.size() + 1);

  double weight = 1.0;
  for (const auto& it : interferers) weight /= static_cast<double>(it.contribution.size());

  RMatrix p = RMatrix::Zero(n_in, n_out);
  std::vector<std::size_t> idx(interferers.size(), 0);
  for (;;) {
    double shift = 0.0;
    for (std::size_t j = 0; j < interferers.size(); ++j) shift += interferers[j].contribution[idx[j]];
    for (Eigen::Index x = 0; x < n_in; ++x) {
      const double mean = self_gain * points[x] + shift;
      for (Eigen::Index j = 0; j < n_out; ++j) {
        const double lo = j == 0 ? -kInf : (thresholds[j - 1] - mean) / noise_std;
        const double hi = j + 1 == n_out ? kInf : (thresholds[j] - mean) / noise_std;
        p(x, j) += weight * normal_interval(lo, hi);
      }
    }
    // Mixed-radix increment over the interferer alphabets.
    std::size_t j = 0;
    for (; j < idx.size(); ++j) {
      if (++idx[j] < interferers[j].contribution.size()) break;
      idx[j] = 0;
    }
    if (j == idx.size()) break;
  }
  return TransitionMatrix(std::move(p));
}

RMatrix mc_standard_error(const TransitionMatrix& m, long n_samples) {
  const RMatrix& p = m.p();
  return (p.array() * (1.0 - p.array()) / static_cast<double>(n_samples)).sqrt().matrix();
}

}  // namespace atr::rxq
