#pragma once

// Achievable rates of PAM over quantized real subchannels, from the mutual
// information of the induced discrete channels, plus Shannon benchmarks.

#include "atr/alloc.hpp"
#include "atr/common.hpp"
#include "atr/rxq.hpp"
#include "atr/subchan.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace atr::rate {

// 16-PAM per real dimension.
inline constexpr int kCapBits = 4;

enum class Scheme { WP_UA, UP_UA, SP_SA, DL_PROPOSED, DL_NAIVE };

std::string_view scheme_name(Scheme s);

struct RateReport {
  std::vector<double> per_subchannel_bits;  // mutual information per symbol
  double scale = 1.0;                       // time share and pilot overhead
  double total_bps_per_hz = 0.0;            // scale * sum(per_subchannel_bits)
  double benchmark_truncated = 0.0;
  Scheme scheme_tag = Scheme::WP_UA;
};

// Uniform input prior, in bits.
double mutual_information(const rxq::TransitionMatrix& m);
double mutual_information(const RMatrix& p);  // validates row-stochasticity

// Estimated-CSI evaluation context. `effective` is the true channel seen
// through the combiner/precoder designed from the estimate; `true_sigma`
// feeds the benchmark.
struct EstimatedCsi {
  const subchan::EffectiveChannel* effective = nullptr;
  std::vector<double> true_sigma;
  int pilot_len = 512;
  int coherence_len = 10240;
  long mc_samples = 100000;
  // Interferer alphabets are enumerated exactly when
  // combinations * |X| * |Y| stays below this; otherwise Monte Carlo.
  double enumeration_budget = 2e5;
  std::uint64_t seed = 0;
};

struct Csi {
  const EstimatedCsi* estimated = nullptr;  // null means perfect CSI

  static Csi perfect() { return {}; }
  static Csi from_estimate(const EstimatedCsi& e) { return Csi{&e}; }
  bool is_perfect() const { return estimated == nullptr; }
};

// Perfect CSI: 2^min(n_bits, cap)-PAM at power P_k over gain sigma_k with unit
// noise and midpoint thresholds.
double subchannel_rate(double sigma_k, double power_k, int n_bits_k, int cap_bits = kCapBits);

// Waterfilled sum of (1/2) log2(1 + sigma_k^2 P_k).
double shannon_capacity(std::span<const double> sigma, double total_power);

double overhead_scale(double rate, int pilot_len, int coherence_len);

RateReport ptp_rate(const subchan::SubchannelDecomposition& design, const alloc::Allocation& a,
                    const Csi& csi, Scheme tag = Scheme::WP_UA, int cap_bits = kCapBits);

enum class TdmaMode { Proposed, Naive };

// Round-robin downlink with n_u users, one symbol per n_u channel uses. The
// proposed receiver keeps refining the buffered sample for all n_u uses.
RateReport dl_user_rate(const subchan::SubchannelDecomposition& design,
                        const alloc::Allocation& a, int n_u, TdmaMode mode, const Csi& csi,
                        int cap_bits = kCapBits);

}  // namespace atr::rate
