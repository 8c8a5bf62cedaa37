#pragma once

// Adaptive-threshold one-bit ADC receiver and the discrete channels it
// induces on PAM-modulated real subchannels.
//
// Two views of the same receiver live here. The step engine
// (adaptive_receiver_step) runs the comparator network channel-use by
// channel-use: selection matrices route buffered analog samples to the
// comparators and each comparator threshold is a bilinear function of the
// earlier comparator outputs in the frame. With a SAR schedule n comparisons
// on one buffered sample realise an n-bit quantizer, which is what the
// QuantizerSpec view describes directly. Rate code only uses the QuantizerSpec
// view; the engine exists to pin the equivalence down.

#include "atr/common.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace atr::rxq {

inline constexpr int kMaxPamLevels = 16;

// Standard normal CDF and P(a <= Z < b), accurate in both tails.
double normal_cdf(double x);
double normal_interval(double a, double b);

// Zero-mean equally spaced M-PAM with uniform-prior average power `power`.
std::vector<double> pam_constellation(int n_levels, double power);

std::vector<double> midpoint_thresholds(std::span<const double> points);

class QuantizerSpec {
 public:
  QuantizerSpec(std::vector<double> thresholds, std::vector<double> reconstruction_points);

  // Midrise uniform quantizer with 2^n_bits levels spanning [-range, range].
  static QuantizerSpec uniform(int n_bits, double range);
  // Decision thresholds at constellation midpoints, reconstruction at the points.
  static QuantizerSpec from_constellation(std::span<const double> points);

  int n_bits() const { return n_bits_; }
  int n_levels() const { return static_cast<int>(reconstruction_.size()); }
  const std::vector<double>& thresholds() const { return thresholds_; }
  const std::vector<double>& reconstruction_points() const { return reconstruction_; }
  bool is_uniform() const;

 private:
  int n_bits_ = 0;
  std::vector<double> thresholds_;
  std::vector<double> reconstruction_;
};

// Bin index = number of thresholds <= sample (a sample on a threshold goes up).
int direct_quantize(double sample, std::span<const double> thresholds);

// Same bin, found by n_bits successive comparisons down the threshold tree.
int sar_quantize(double sample, const QuantizerSpec& spec);

// ---------------------------------------------------------------------------
// Step engine

struct ThresholdCoefficients {
  RVector left;   // u^l_k, length n_adcs (empty = zero)
  RVector right;  // u^r_k, length = outputs so far in the frame (empty = zero)
};

struct ReceiverConfig {
  RMatrix combiner;  // V, n_v x n_in
  int buffer_len = 1;
  // Indexed by use-in-frame i in [0, buffer_len).
  std::vector<RMatrix> selection;                              // B(i): n_adcs x buffer_len*n_v
  std::vector<std::vector<ThresholdCoefficients>> coefficients;  // [i][k]
  RVector fixed_thresholds;                                    // t, length n_adcs

  int n_adcs() const { return static_cast<int>(fixed_thresholds.size()); }
  int combined_dim() const { return static_cast<int>(combiner.rows()); }
  void validate() const;
};

// The delay network fills one frame of buffer_len combined samples while the
// previously completed frame is held and fed to the comparators.
struct ReceiverState {
  RVector filling;
  RVector held;
  bool held_valid = false;
  int use_in_frame = 0;
  long frames_completed = 0;
  RMatrix history;                    // n_adcs x use_in_frame outputs of the current frame
  std::vector<int> slot_comparisons;  // per held slot, current frame
  std::vector<int> last_slot_comparisons;
  std::vector<std::vector<int>> last_slot_bits;  // per held slot, in comparison order
  std::vector<std::vector<int>> slot_bits;
};

ReceiverState initial_state(const ReceiverConfig& cfg);

struct StepOutput {
  RVector adc;  // entries in {-1, +1}
  // Frame whose samples were compared at this use; -1 while the pipeline fills.
  long held_frame = -1;
};

StepOutput adaptive_receiver_step(ReceiverState& state, const RVector& y,
                                  const ReceiverConfig& cfg);

enum class SarLayout {
  SingleSample,  // one comparator refines slot 0 over buffer_len = n_bits uses
  Pipelined,     // n_bits comparators, comparator j refines slot j of the held frame
};

// SAR schedule for a scalar channel realising `spec` (which must be uniform).
ReceiverConfig sar_receiver(const QuantizerSpec& spec, SarLayout layout);

// Decodes comparison bits (+1/-1, first comparison first) into a bin index.
int decode_sar_bits(std::span<const int> bits);

// ---------------------------------------------------------------------------
// Discrete channel matrices

class TransitionMatrix {
 public:
  explicit TransitionMatrix(RMatrix p, double row_tolerance = 1e-9);

  const RMatrix& p() const { return p_; }
  int inputs() const { return static_cast<int>(p_.rows()); }
  int outputs() const { return static_cast<int>(p_.cols()); }
  double operator()(int x, int y) const { return p_(x, y); }

 private:
  RMatrix p_;
};

void write_csv(const TransitionMatrix& m, std::ostream& os);

// P(bin | x) for y = gain * x + N(0, noise_std^2), bins given by `thresholds`.
TransitionMatrix transition_matrix_awgn(std::span<const double> points,
                                        std::span<const double> thresholds, double gain,
                                        double noise_std);

// One row of an effective channel as seen by the self subchannel: interferer j
// adds gain_row[j] * X_j with X_j uniform over interference_points[j]. The
// self entry and empty lists are skipped.
struct InterferenceRow {
  std::span<const double> gain_row;
  int self_index = 0;
  std::span<const std::vector<double>> interference_points;
};

inline constexpr long kMinMcSamples = 10000;

// Monte Carlo estimate from counts; every row reuses the same interference
// and noise draws. n_samples draws per row.
TransitionMatrix transition_matrix_mc(std::span<const double> points,
                                      std::span<const double> thresholds,
                                      const InterferenceRow& row, double noise_std,
                                      long n_samples, Rng& rng);

// Exact marginalisation over the joint interferer alphabet with closed-form
// noise. Cost grows with the product of interferer alphabet sizes.
TransitionMatrix transition_matrix_enumerated(std::span<const double> points,
                                              std::span<const double> thresholds,
                                              const InterferenceRow& row, double noise_std);

// Number of joint interferer symbol combinations for `row`.
double interference_alphabet_size(const InterferenceRow& row);

// Binomial standard error of each entry of a count-based estimate.
RMatrix mc_standard_error(const TransitionMatrix& m, long n_samples);

}  // namespace atr::rxq
