#pragma once

// Power and one-bit-ADC allocation heuristics over real subchannels.
// Subchannel gains are noise-normalised (unit noise variance per real
// dimension) and indexed strongest first.

#include <span>
#include <vector>

namespace atr::alloc {

struct Allocation {
  std::vector<double> powers;  // P_k
  std::vector<int> adc_bits;   // n_q,k
  double total_power = 0.0;    // budget P
  int total_adcs = 0;          // budget n_q
};

// P_k = max(0, mu - 1/g_k) with sum P_k = total_power; g_k = 0 gets nothing.
std::vector<double> waterfill(std::span<const double> gains_sq, double total_power);

// total_power / s_active on the first s_active of s_total subchannels.
std::vector<double> uniform_power(int s_active, int s_total, double total_power);

// `active` lists subchannel indices strongest first; result has length s_total.
std::vector<int> allocate_adcs_uniform(std::span<const int> active, int n_q, int s_total);

enum class SelectionMode {
  SingleReal,  // strongest real subchannel only
  IqPair,      // strongest subchannel and its partner, split evenly
};

Allocation sp_sa(std::span<const double> sigma, double total_power, int n_q,
                 SelectionMode mode = SelectionMode::SingleReal);
Allocation wp_ua(std::span<const double> sigma, double total_power, int n_q);
Allocation up_ua(std::span<const double> sigma, double total_power, int n_q);

}  // namespace atr::alloc
