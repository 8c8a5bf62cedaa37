#include "atr/subchan.hpp"

#include <doctest.h>

#include <algorithm>

using namespace atr;
using namespace atr::subchan;

namespace {

CMatrix random_complex(int r, int c, Rng& rng) {
  std::normal_distribution<double> n;
  CMatrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = {n(rng), n(rng)};
  return m;
}

RMatrix from_sigma(const SubchannelDecomposition& d, int rows, int cols) {
  RMatrix s = RMatrix::Zero(rows, cols);
  for (int k = 0; k < d.s; ++k) s(k, k) = d.sigma[k];
  return d.u * s * d.v.transpose();
}

}  // namespace

TEST_CASE("real expansion") {
  CMatrix i1(1, 1);
  i1(0, 0) = cdouble(0, 1);
  RMatrix want(2, 2);
  want << 0, -1, 1, 0;
  CHECK(real_expand(i1) == want);

  RMatrix r(2, 3);
  r << 1, 2, 3, 4, 5, 6;
  const RMatrix e = real_expand(r.cast<cdouble>());
  CHECK(e.topLeftCorner(2, 3) == r);
  CHECK(e.bottomRightCorner(2, 3) == r);
  CHECK(e.topRightCorner(2, 3).isZero());
  CHECK(e.bottomLeftCorner(2, 3).isZero());

  Rng rng(1);
  const CMatrix h = random_complex(4, 6, rng);
  CHECK(real_expand(h).squaredNorm() == doctest::Approx(2 * h.squaredNorm()));
  CHECK(noise_normalized_real(h).isApprox(std::sqrt(2.0) * real_expand(h)));
}

TEST_CASE("SVD subchannels") {
  SUBCASE("identity and diagonal") {
    const auto d = svd_subchannels(RMatrix::Identity(4, 4));
    CHECK(d.s == 4);
    for (double s : d.sigma) CHECK(s == doctest::Approx(1.0));
    RMatrix g = RMatrix::Zero(2, 2);
    g(0, 0) = 1;
    g(1, 1) = 3;
    const auto e = svd_subchannels(g);
    REQUIRE(e.s == 2);
    CHECK(e.sigma[0] == doctest::Approx(3.0));
    CHECK(e.sigma[1] == doctest::Approx(1.0));
  }

  SUBCASE("reconstruction, orthonormality and pairing") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
      const CMatrix h = random_complex(4, 8, rng);
      const RMatrix hr = real_expand(h);
      const auto d = svd_subchannels(hr);
      CHECK(d.s == 8);
      CHECK((d.u.transpose() * d.u - RMatrix::Identity(8, 8)).norm() < 1e-9);
      CHECK((d.v.transpose() * d.v - RMatrix::Identity(16, 16)).norm() < 1e-9);
      CHECK(std::is_sorted(d.sigma.rbegin(), d.sigma.rend()));
      CHECK((from_sigma(d, 8, 16) - hr).norm() <= 1e-8 * hr.norm());

      Eigen::JacobiSVD<CMatrix> csvd(h);
      for (int k = 0; k < 4; ++k) {
        CHECK(d.sigma[2 * k] == doctest::Approx(csvd.singularValues()(k)).epsilon(1e-8));
        CHECK(d.sigma[2 * k + 1] == doctest::Approx(csvd.singularValues()(k)).epsilon(1e-8));
      }
    }
  }

  SUBCASE("rank truncation") {
    CMatrix h(3, 3);
    h.setZero();
    h(0, 0) = 2.0;
    const auto d = svd_subchannels(real_expand(h));
    CHECK(d.s == 2);
    CHECK(d.sigma.size() == 2);
    CHECK(d.u.rows() == 6);
  }
}

TEST_CASE("effective channel") {
  Rng rng(4);
  const RMatrix h = real_expand(random_complex(4, 8, rng));
  const auto d = svd_subchannels(h);
  const RMatrix g = effective_channel(h, d).g;
  double max_diag = 0.0, max_off = 0.0;
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) {
      double& slot = i == j ? max_diag : max_off;
      slot = std::max(slot, std::abs(g(i, j)));
    }
  CHECK(max_off <= 1e-9 * max_diag);
  for (int k = 0; k < d.s; ++k) CHECK(g(k, k) == doctest::Approx(d.sigma[k]));
  CHECK(g.norm() == doctest::Approx(h.norm()));

  const RMatrix e = real_expand(random_complex(4, 8, rng));
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const auto de = svd_subchannels(h + eps * e);
    RMatrix ge = effective_channel(h, de).g;
    const double off = ge.squaredNorm() - ge.diagonal().squaredNorm();
    CHECK(off < prev);
    prev = off;
  }
  CHECK(prev < 1e-6 * h.squaredNorm());

  CHECK_THROWS(effective_channel(RMatrix::Zero(3, 3), d));
}
