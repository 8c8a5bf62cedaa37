#pragma once

// Real-valued MIMO subchannels: the complex channel is expanded into its
// real/imaginary block form and diagonalised by a real SVD.

#include "atr/common.hpp"

#include <vector>

namespace atr::subchan {

struct SubchannelDecomposition {
  RMatrix u;                  // 2n_r x 2n_r, orthonormal
  RMatrix v;                  // 2n_t x 2n_t, orthonormal
  std::vector<double> sigma;  // nonincreasing, length s
  int s = 0;
};

struct EffectiveChannel {
  RMatrix g;  // u^T * H_true * v
};

inline constexpr double kRankTruncation = 1e-6;

// [[Re H, -Im H], [Im H, Re H]]
RMatrix real_expand(const CMatrix& h);

// Real expansion scaled by sqrt(2): unit-variance complex noise puts variance
// 1/2 on each real dimension, so this is the channel seen after whitening to
// unit noise per real dimension. Allocation and rate code works in this scale.
RMatrix noise_normalized_real(const CMatrix& h);

// Singular values below rel_truncation * sigma_max are dropped from `sigma`
// (s counts the survivors); u and v stay full.
SubchannelDecomposition svd_subchannels(const RMatrix& h_real,
                                        double rel_truncation = kRankTruncation);

// Channel seen through a combiner/precoder designed from `design`, which may
// come from an estimate of h_true_real.
EffectiveChannel effective_channel(const RMatrix& h_true_real,
                                   const SubchannelDecomposition& design);

}  // namespace atr::subchan
