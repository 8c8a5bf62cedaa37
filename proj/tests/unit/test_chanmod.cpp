#include "atr/chanmod.hpp"

#include <doctest.h>

#include <cmath>

using namespace atr;
using namespace atr::chanmod;

TEST_CASE("los probability follows the exponential decay") {
  CHECK(los_probability(0.0) == doctest::Approx(1.0));
  CHECK(los_probability(10.0) == doctest::Approx(0.8616).epsilon(1e-4));
  CHECK(los_probability(std::log(2.0) / 0.0149) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(los_probability(-1.0), std::domain_error);
}

TEST_CASE("path loss fits") {
  CHECK(path_loss_db(10.0, LinkTag::LOS, 0.0) == doctest::Approx(81.4));
  CHECK(path_loss_db(1.0, LinkTag::LOS, 0.0) == doctest::Approx(61.4));
  CHECK(path_loss_db(10.0, LinkTag::NLOS, 0.0) == doctest::Approx(101.2));
  CHECK(path_loss_db(10.0, LinkTag::NLOS, 3.0) == doctest::Approx(104.2));
  CHECK_THROWS_AS(path_loss_db(0.5, LinkTag::LOS, 0.0), std::domain_error);
}

TEST_CASE("noise floor and link SNR") {
  LinkBudget b;
  CHECK(b.noise_floor_dbm() == doctest::Approx(-78.0));
  LinkState s{LinkTag::LOS, 10.0, 0.0};
  CHECK(link_snr_db(s, {}, b) == doctest::Approx(30.0 - 81.4 + 78.0));
  CHECK(beta_from_snr_db(20.0) == doctest::Approx(10.0));
}

TEST_CASE("steering vectors") {
  const ArrayGeometry g{4, 4, 0.5};
  const CVector a0 = upa_steering(0.0, 0.0, g);
  CHECK((a0 - CVector::Ones(16)).norm() < 1e-15);

  const CVector a = upa_steering(0.7, -0.3, g);
  CHECK(a.squaredNorm() == doctest::Approx(16.0));
  for (int i = 0; i < a.size(); ++i) CHECK(std::abs(a(i)) == doctest::Approx(1.0));

  // element (p, q) at p*cols + q
  const double el = 0.2, az = 0.5;
  const CVector b = upa_steering(az, el, g);
  const double ph = 2 * kPi * 0.5 * (2 * std::sin(el) + 3 * std::sin(az) * std::cos(el));
  CHECK(std::abs(b(2 * 4 + 3) - std::polar(1.0, ph)) < 1e-12);

  const ArrayGeometry row{1, 8, 0.5};
  const CVector p = upa_steering(0.4, 0.1, row);
  const CVector m = upa_steering(-0.4, 0.1, row);
  CHECK((p - m.conjugate()).norm() < 1e-12);

  CHECK_THROWS(upa_steering(4.0, 0.0, g));
  CHECK_THROWS(upa_steering(0.0, 2.0, g));
}

TEST_CASE("cluster count is max(1, Poisson)") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 1000000;
  int min_seen = 100;
  for (int i = 0; i < n; ++i) {
    const int c = sample_cluster_count(1.8, rng);
    sum += c;
    min_seen = std::min(min_seen, c);
  }
  CHECK(min_seen >= 1);
  CHECK(sum / n == doctest::Approx(1.8 + std::exp(-1.8)).epsilon(0.01 / 1.9653));
  for (int i = 0; i < 1000; ++i) CHECK(sample_cluster_count(1e-9, rng) == 1);
  CHECK_THROWS(sample_cluster_count(0.0, rng));
}

TEST_CASE("user drops are area-uniform on the ring") {
  Rng rng(11);
  const int n = 100000;
  double r2 = 0.0;
  bool inside = true;
  for (int i = 0; i < n; ++i) {
    const Position p = drop_user(10.0, 50.0, rng);
    const double r = p.radius();
    inside = inside && r >= 10.0 && r <= 50.0;
    r2 += r * r;
  }
  CHECK(inside);
  CHECK(r2 / n == doctest::Approx(1300.0).epsilon(0.01));
  CHECK(drop_user(50.0 - 1e-9, 50.0, rng).radius() == doctest::Approx(50.0));
  CHECK_THROWS(drop_user(50.0, 50.0, rng));
}

TEST_CASE("channel synthesis") {
  const ArrayGeometry bs{8, 8, 0.5}, ue{4, 4, 0.5};

  SUBCASE("single ray is rank one") {
    ClusterSet cs;
    Cluster c;
    c.central = {0.3, 0.1, -0.5, -0.2};
    c.ray_offsets = {RayAngles{}};
    c.ray_gains = {cdouble(0.6, -0.8)};
    cs.clusters.push_back(c);
    const auto ch = synthesize_channel(cs, bs, ue, 2.0);
    CHECK(ch.h.rows() == 16);
    CHECK(ch.h.cols() == 64);
    Eigen::JacobiSVD<CMatrix> svd(ch.h);
    const auto& s = svd.singularValues();
    CHECK(s(1) < 1e-9 * s(0));
    const auto ch3 = synthesize_channel(cs, bs, ue, 6.0);
    CHECK(ch3.h.norm() == doctest::Approx(3.0 * ch.h.norm()));
  }

  SUBCASE("Frobenius normalisation") {
    Rng rng(3);
    const ClusterModel model;
    const int n = 10000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto cs = sample_clusters(model, rng);
      const auto ch = synthesize_channel(cs, bs, ue, 1.5);
      CHECK(ch.h.allFinite());
      acc += ch.h.squaredNorm() / (1.5 * 1.5 * 16 * 64);
    }
    CHECK(acc / n == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("rank bounded by ray count and deterministic regeneration") {
    ClusterModel model;
    model.rays_per_cluster = 2;
    Rng a(99), b(99);
    const auto ca = sample_clusters(model, a);
    const auto cb = sample_clusters(model, b);
    const auto ha = synthesize_channel(ca, bs, ue, 1.0);
    const auto hb = synthesize_channel(cb, bs, ue, 1.0);
    CHECK(ha.h == hb.h);
    Eigen::JacobiSVD<CMatrix> svd(ha.h);
    const auto& s = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < s.size(); ++i) rank += s(i) > 1e-9 * s(0);
    CHECK(rank <= ca.total_rays());
  }

  SUBCASE("JSON line round trip") {
    Rng rng(5);
    auto ch = synthesize_channel(sample_clusters({}, rng), bs, ue, 3.0);
    ch.link = sample_link(25.0, {}, rng);
    const auto back = channel_from_json_line(channel_to_json_line(ch));
    CHECK(back.h == ch.h);
    CHECK(back.beta_linear == ch.beta_linear);
    CHECK(back.link.tag == ch.link.tag);
    CHECK(back.link.distance_m == ch.link.distance_m);
    CHECK(back.clusters.total_rays() == ch.clusters.total_rays());
  }
}

TEST_CASE("link sampling matches the LOS probability") {
  Rng rng(13);
  int los = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) los += sample_link(30.0, {}, rng).tag == LinkTag::LOS;
  CHECK(static_cast<double>(los) / n == doctest::Approx(std::exp(-0.0149 * 30.0)).epsilon(0.01));
}
