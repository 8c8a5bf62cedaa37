#include "atr/alloc.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace atr::alloc {

std::vector<double> waterfill(std::span<const double> gains_sq, double total_power) {
  if (!(total_power > 0.0)) throw std::invalid_argument("waterfill: total power must be positive");
  for (double g : gains_sq)
    if (!(g >= 0.0)) throw std::invalid_argument("waterfill: negative gain");

  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < gains_sq.size(); ++k)
    if (gains_sq[k] > 0.0) order.push_back(k);
  if (order.empty()) throw std::invalid_argument("waterfill: all gains are zero");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gains_sq[a] > gains_sq[b]; });

  // Grow the active set strongest first; the water level for m channels is
  // (P + sum 1/g) / m and it is valid once it stays above the next floor.
  double inv_sum = 0.0;
  double mu = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double floor_i = 1.0 / gains_sq[order[i]];
    const double candidate = (total_power + inv_sum + floor_i) / static_cast<double>(i + 1);
    if (i > 0 && candidate <= floor_i) break;
    inv_sum += floor_i;
    mu = candidate;
    m = i + 1;
  }

  std::vector<double> p(gains_sq.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) p[order[i]] = std::max(0.0, mu - 1.0 / gains_sq[order[i]]);
  return p;
}

std::vector<double> uniform_power(int s_active, int s_total, double total_power) {
  if (s_active <= 0) throw std::invalid_argument("uniform_power: no active subchannels");
  if (s_active > s_total) throw std::invalid_argument("uniform_power: more active than total");
  std::vector<double> p(s_total, 0.0);
  std::fill_n(p.begin(), s_active, total_power / s_active);
  return p;
}

std::vector<int> allocate_adcs_uniform(std::span<const int> active, int n_q, int s_total) {
  if (n_q < 0) throw std::invalid_argument("allocate_adcs_uniform: negative ADC count");
  std::vector<int> bits(s_total, 0);
  if (n_q == 0) return bits;
  if (active.empty()) throw std::invalid_argument("allocate_adcs_uniform: no active subchannels");
  for (int k : active)
    if (k < 0 || k >= s_total) throw std::invalid_argument("allocate_adcs_uniform: bad index");

  const int n_active = static_cast<int>(active.size());
  if (n_active >= n_q) {
    for (int i = 0; i < n_q; ++i) bits[active[i]] = 1;
    return bits;
  }
  const int base = n_q / n_active;
  const int extra = n_q % n_active;
  for (int i = 0; i < n_active; ++i) bits[active[i]] = base + (i < extra ? 1 : 0);
  return bits;
}

namespace {

std::vector<int> strongest_first(std::span<const double> sigma, auto keep) {
  std::vector<int> idx;
  for (int k = 0; k < static_cast<int>(sigma.size()); ++k)
    if (keep(k)) idx.push_back(k);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return sigma[a] > sigma[b]; });
  return idx;
}

Allocation empty_allocation(std::size_t s, double total_power, int n_q) {
  return Allocation{std::vector<double>(s, 0.0), std::vector<int>(s, 0), total_power, n_q};
}

}  // namespace

Allocation sp_sa(std::span<const double> sigma, double total_power, int n_q, SelectionMode mode) {
  Allocation a = empty_allocation(sigma.size(), total_power, n_q);
  if (sigma.empty()) return a;
  // max_element returns the first maximum: lowest index wins ties.
  const auto best = static_cast<std::size_t>(std::max_element(sigma.begin(), sigma.end()) - sigma.begin());
  if (mode == SelectionMode::IqPair && sigma.size() > 1) {
    const std::size_t partner = best % 2 == 0 ? best + 1 : best - 1;
    if (partner < sigma.size()) {
      a.powers[best] = a.powers[partner] = total_power / 2.0;
      a.adc_bits[best] = n_q - n_q / 2;
      a.adc_bits[partner] = n_q / 2;
      return a;
    }
  }
  a.powers[best] = total_power;
  a.adc_bits[best] = n_q;
  return a;
}

Allocation wp_ua(std::span<const double> sigma, double total_power, int n_q) {
  Allocation a = empty_allocation(sigma.size(), total_power, n_q);
  std::vector<double> g2(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) g2[k] = sigma[k] * sigma[k];
  a.powers = waterfill(g2, total_power);
  const auto active = strongest_first(sigma, [&](int k) { return a.powers[k] > 0.0; });
  a.adc_bits = allocate_adcs_uniform(active, n_q, static_cast<int>(sigma.size()));
  return a;
}

Allocation up_ua(std::span<const double> sigma, double total_power, int n_q) {
  Allocation a = empty_allocation(sigma.size(), total_power, n_q);
  // Decompositions already drop numerically-zero subchannels, so every
  // positive sigma is active.
  const auto active = strongest_first(sigma, [&](int k) { return sigma[k] > 0.0; });
  if (active.empty()) throw std::invalid_argument("up_ua: no active subchannels");
  a.powers.assign(sigma.size(), 0.0);
  for (int k : active) a.powers[k] = total_power / static_cast<double>(active.size());
  a.adc_bits = allocate_adcs_uniform(active, n_q, static_cast<int>(sigma.size()));
  return a;
}

}  // namespace atr::alloc
