#include "atr/subchan.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace atr::subchan {

RMatrix real_expand(const CMatrix& h) {
  const auto nr = h.rows();
  const auto nt = h.cols();
  RMatrix out(2 * nr, 2 * nt);
  out.topLeftCorner(nr, nt) = h.real();
  out.topRightCorner(nr, nt) = -h.imag();
  out.bottomLeftCorner(nr, nt) = h.imag();
  out.bottomRightCorner(nr, nt) = h.real();
  return out;
}

RMatrix noise_normalized_real(const CMatrix& h) { return std::sqrt(2.0) * real_expand(h); }

SubchannelDecomposition svd_subchannels(const RMatrix& h_real, double rel_truncation) {
  if (!h_real.allFinite()) throw std::invalid_argument("svd_subchannels: non-finite input");
  Eigen::JacobiSVD<RMatrix> svd(h_real, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVector& sv = svd.singularValues();
  const auto n = sv.size();

  // Canonical order: descending value, ties broken by original index.
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sv(a) > sv(b); });

  SubchannelDecomposition d;
  d.u = svd.matrixU();
  d.v = svd.matrixV();
  for (Eigen::Index k = 0; k < n; ++k) {
    d.u.col(k) = svd.matrixU().col(order[k]);
    d.v.col(k) = svd.matrixV().col(order[k]);
  }
  // Sign convention: largest-magnitude entry of each left vector is positive.
  for (Eigen::Index k = 0; k < d.u.cols(); ++k) {
    Eigen::Index idx = 0;
    d.u.col(k).cwiseAbs().maxCoeff(&idx);
    if (d.u(idx, k) < 0.0) {
      d.u.col(k) *= -1.0;
      if (k < n) d.v.col(k) *= -1.0;
    }
  }

  const double smax = n > 0 ? sv(order[0]) : 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = sv(order[k]);
    if (smax > 0.0 && s > rel_truncation * smax) d.sigma.push_back(s);
  }
  d.s = static_cast<int>(d.sigma.size());
  return d;
}

EffectiveChannel effective_channel(const RMatrix& h_true_real,
                                   const SubchannelDecomposition& design) {
  if (design.u.rows() != h_true_real.rows() || design.v.rows() != h_true_real.cols())
    throw std::invalid_argument("effective_channel: dimension mismatch");
  return EffectiveChannel{design.u.transpose() * h_true_real * design.v};
}

}  // namespace atr::subchan
