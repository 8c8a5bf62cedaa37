#include "atr/rate.hpp"

#include <doctest.h>

#include <cmath>

using namespace atr;
using namespace atr::rate;

namespace {

subchan::SubchannelDecomposition diag_decomp(const std::vector<double>& sigma) {
  const int s = static_cast<int>(sigma.size());
  RMatrix h = RMatrix::Zero(s, s);
  for (int k = 0; k < s; ++k) h(k, k) = sigma[k];
  return subchan::svd_subchannels(h);
}

double h2(double p) { return -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

}  // namespace

TEST_CASE("mutual information of reference channels") {
  CHECK(mutual_information(RMatrix::Identity(4, 4)) == doctest::Approx(2.0));
  RMatrix same(3, 4);
  same.rowwise() = Eigen::RowVector4d(0.1, 0.2, 0.3, 0.4);
  CHECK(mutual_information(same) == doctest::Approx(0.0).epsilon(1e-15));
  RMatrix bsc(2, 2);
  bsc << 0.89, 0.11, 0.11, 0.89;
  CHECK(mutual_information(bsc) == doctest::Approx(1.0 - h2(0.11)).epsilon(1e-12));
  CHECK(std::abs(mutual_information(bsc) - 0.5004) <= 5e-4);
  RMatrix erased(2, 3);
  erased << 0.7, 0.3, 0.0, 0.0, 0.3, 0.7;
  CHECK(mutual_information(erased) == doctest::Approx(0.7));
  RMatrix bad(1, 2);
  bad << 0.6, 0.6;
  CHECK_THROWS(mutual_information(bad));
}

TEST_CASE("subchannel rate") {
  CHECK(subchannel_rate(2.0, 1.0, 0) == 0.0);
  CHECK(subchannel_rate(0.0, 1.0, 2) == 0.0);
  CHECK(subchannel_rate(1e4, 1.0, 2) == doctest::Approx(2.0));
  CHECK(subchannel_rate(1e4, 1.0, 6) == doctest::Approx(4.0));
  CHECK(subchannel_rate(1e4, 1.0, 6, 3) == doctest::Approx(3.0));

  for (int bits = 1; bits <= 4; ++bits) {
    double prev = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double snr = std::pow(10.0, -2.0 + 0.25 * i);
      const double r = subchannel_rate(std::sqrt(snr), 1.0, bits);
      CHECK(r >= prev);
      CHECK(r <= bits + 1e-12);
      CHECK(r <= 0.5 * std::log2(1.0 + snr) + 1e-12);
      prev = r;
    }
  }
}

TEST_CASE("Shannon capacity") {
  CHECK(shannon_capacity(std::vector<double>{1.0, 1.0}, 6.0) == doctest::Approx(2.0));
  CHECK(shannon_capacity(std::vector<double>{1.0, 2.0}, 0.0) == 0.0);
  double prev = 0.0;
  for (double p = 0.01; p < 1e3; p *= 1.5) {
    const double c = shannon_capacity(std::vector<double>{3.0, 1.0, 0.2}, p);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("pilot overhead") {
  CHECK(overhead_scale(1.0, 512, 10240) == 0.95);
  CHECK(overhead_scale(3.7, 0, 100) == 3.7);
  CHECK(overhead_scale(2.0, 512, 10240) == doctest::Approx(2 * overhead_scale(1.0, 512, 10240)));
  CHECK_THROWS(overhead_scale(1.0, 100, 100));
}

TEST_CASE("point-to-point rates") {
  const auto d = diag_decomp({400, 300, 200, 150, 120, 110, 105, 100});
  const auto a = alloc::wp_ua(d.sigma, 1.0, 8);
  const auto r = ptp_rate(d, a, Csi::perfect());
  CHECK(r.total_bps_per_hz >= 7.8);
  CHECK(r.total_bps_per_hz <= 8.0);
  CHECK(r.total_bps_per_hz <= r.benchmark_truncated);

  alloc::Allocation zero{std::vector<double>(8, 0.0), std::vector<int>(8, 0), 1.0, 8};
  CHECK(ptp_rate(d, zero, Csi::perfect()).total_bps_per_hz == 0.0);

  const auto weak = diag_decomp({0.3, 0.2, 0.1});
  for (const auto& al : {alloc::wp_ua(weak.sigma, 1.0, 8), alloc::up_ua(weak.sigma, 1.0, 8),
                         alloc::sp_sa(weak.sigma, 1.0, 8)}) {
    const auto rr = ptp_rate(weak, al, Csi::perfect());
    CHECK(rr.total_bps_per_hz <= rr.benchmark_truncated);
  }
  CHECK(ptp_rate(d, alloc::sp_sa(d.sigma, 1.0, 8), Csi::perfect()).total_bps_per_hz ==
        doctest::Approx(4.0));
}

TEST_CASE("downlink TDMA") {
  const auto d = diag_decomp({400, 300, 200, 150, 120, 110, 105, 100});
  const auto a = alloc::wp_ua(d.sigma, 1.0, 8);
  const auto ptp = ptp_rate(d, a, Csi::perfect());
  CHECK(dl_user_rate(d, a, 1, TdmaMode::Proposed, Csi::perfect()).total_bps_per_hz == ptp.total_bps_per_hz);
  CHECK(dl_user_rate(d, a, 1, TdmaMode::Naive, Csi::perfect()).total_bps_per_hz == ptp.total_bps_per_hz);

  const double prop = dl_user_rate(d, a, 10, TdmaMode::Proposed, Csi::perfect()).total_bps_per_hz;
  const double naive = dl_user_rate(d, a, 10, TdmaMode::Naive, Csi::perfect()).total_bps_per_hz;
  CHECK(prop == doctest::Approx(3.2).epsilon(0.02));
  CHECK(naive == doctest::Approx(0.8).epsilon(0.02));
  CHECK(prop / naive == doctest::Approx(4.0).epsilon(0.05));

  const auto weak = diag_decomp({1.0, 0.5, 0.3});
  const auto aw = alloc::wp_ua(weak.sigma, 1.0, 8);
  for (int n_u : {2, 5, 10})
    CHECK(dl_user_rate(weak, aw, n_u, TdmaMode::Proposed, Csi::perfect()).total_bps_per_hz >=
          dl_user_rate(weak, aw, n_u, TdmaMode::Naive, Csi::perfect()).total_bps_per_hz);
  CHECK_THROWS(dl_user_rate(d, a, 0, TdmaMode::Naive, Csi::perfect()));
}

TEST_CASE("estimated CSI with a perfect estimate reproduces the perfect rate") {
  const auto d = diag_decomp({3.0, 2.0, 1.0, 0.5});
  const subchan::EffectiveChannel eff{RMatrix(d.u.transpose() *
                                              RMatrix(Eigen::Vector4d(3.0, 2.0, 1.0, 0.5).asDiagonal()) * d.v)};
  const auto a = alloc::wp_ua(d.sigma, 1.0, 8);
  EstimatedCsi e;
  e.effective = &eff;
  e.true_sigma = d.sigma;
  e.seed = 9;
  const auto est = ptp_rate(d, a, Csi::from_estimate(e));
  const auto per = ptp_rate(d, a, Csi::perfect());
  CHECK(est.total_bps_per_hz == doctest::Approx(0.95 * per.total_bps_per_hz).epsilon(1e-9));
  CHECK(est.benchmark_truncated == 0.95 * per.benchmark_truncated);

  e.enumeration_budget = 0.0;
  const auto mc = ptp_rate(d, a, Csi::from_estimate(e));
  CHECK(mc.total_bps_per_hz == doctest::Approx(est.total_bps_per_hz).epsilon(0.01));
}
