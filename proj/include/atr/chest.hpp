#pragma once

// Channel estimation from pilots observed through uniformly allocated
// low-resolution ADCs (m bits on every real dimension of every antenna).

#include "atr/chanmod.hpp"
#include "atr/common.hpp"

#include <optional>
#include <string_view>

namespace atr::chest {

struct PilotBlock {
  CMatrix pilots;                 // n_t x n_p
  Eigen::MatrixXi quantized_obs;  // 2n_r x n_p bin indices, real parts first
  int bits_per_dim = 3;
  double agc_range = 1.0;
  double agc_loading = 3.0;  // agc_range / analog RMS per real dimension
  // Analog observations, present only for the unquantized reference path
  // (bits_per_dim == 0).
  std::optional<CMatrix> unquantized_obs;
};

struct AngularDictionaries {
  CMatrix rx;  // n_r x n_r unitary
  CMatrix tx;  // n_t x n_t unitary
};

struct AngularEstimate {
  CMatrix g_hat;  // angular coefficients
  CMatrix h_hat;  // rx * g_hat * tx^H
  bool converged = true;
};

// Orthonormal 2-D spatial DFT basis matching upa_steering's element order.
CMatrix angular_dictionary(const chanmod::ArrayGeometry& geom);
AngularDictionaries make_dictionaries(const chanmod::ArrayGeometry& user,
                                      const chanmod::ArrayGeometry& bs);

// i.i.d. QPSK, every column with power exactly `power`.
CMatrix gen_pilots(int n_t, int n_p, double power, Rng& rng);

// Midrise uniform quantizer over [-agc_range, agc_range] per real dimension.
Eigen::MatrixXi quantize_observations(const CMatrix& y, int bits_per_dim, double agc_range);
CMatrix dequantize_observations(const Eigen::MatrixXi& q, int bits_per_dim, double agc_range);

// Linear gain and distortion variance of the midrise quantizer for a
// zero-mean Gaussian input with standard deviation input_std.
struct BussgangGain {
  double alpha = 1.0;
  double distortion_var = 0.0;
};
BussgangGain bussgang_uniform(int bits_per_dim, double agc_range, double input_std);

struct LmmseOptions {
  double prior_var = 1.0;  // per angular coefficient
  double noise_var = 1.0;  // complex noise variance per antenna
  double ridge = 1e-6;     // relative to the mean diagonal of the normal matrix
};

AngularEstimate estimate_bussgang_lmmse(const PilotBlock& block, const AngularDictionaries& dicts,
                                        const LmmseOptions& opt);

struct GampOptions {
  int max_iter = 50;
  double damping = 0.5;
  int em_every = 1;        // EM hyperparameter update period, in iterations
  double tolerance = 1e-5;  // relative change of the coefficient estimate
  double noise_var = 1.0;
};

// Sparse (Bernoulli-Gaussian) angular-domain estimate from the quantized
// pilots, with EM-learned sparsity and variance. Returns the last finite iterate
// with converged = false when the tolerance is not met.
AngularEstimate estimate_gamp_em(const PilotBlock& block, const AngularDictionaries& dicts,
                                 const GampOptions& opt, double prior_var);

inline constexpr double kNmseFloorDb = -200.0;
double nmse_db(const CMatrix& h_true, const CMatrix& h_hat);

enum class Estimator { BussgangLmmse, GampEm };

Estimator estimator_from_name(std::string_view name);
std::string_view estimator_name(Estimator e);

struct PilotConfig {
  int n_p = 512;
  int bits_per_dim = 3;  // 0 selects the unquantized reference path
  double agc_loading = 3.0;
  double power = 1.0;
  double noise_var = 1.0;
  Estimator estimator = Estimator::BussgangLmmse;
  GampOptions gamp;
};

// Transmits pilots through h with CN(0, noise_var) noise and quantizes.
PilotBlock observe_pilots(const CMatrix& h, const PilotConfig& cfg, Rng& rng);

struct EstimationResult {
  AngularEstimate estimate;
  double nmse_db = 0.0;
};

EstimationResult estimate_channel(const CMatrix& h, double prior_var,
                                  const AngularDictionaries& dicts, const PilotConfig& cfg,
                                  Rng& rng);

}  // namespace atr::chest
