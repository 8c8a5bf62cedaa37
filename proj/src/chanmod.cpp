#include "atr/chanmod.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atr::chanmod {

namespace {

double wrap_azimuth(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double clamp_elevation(double e) { return std::clamp(e, -kPi / 2, kPi / 2); }

double deg2rad(double d) { return d * kPi / 180.0; }

}  // namespace

int ClusterSet::total_rays() const {
  int n = 0;
  for (const auto& c : clusters) n += static_cast<int>(c.ray_gains.size());
  return n;
}

double LinkBudget::noise_floor_dbm() const {
  return noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double Position::radius() const { return std::hypot(x, y); }

double los_probability(double distance_m, const PropagationModel& model) {
  if (!(distance_m >= 0.0)) throw std::domain_error("los_probability: negative distance");
  return std::clamp(std::exp(-model.los_decay_per_m * distance_m), 0.0, 1.0);
}

double path_loss_db(double distance_m, LinkTag tag, double shadowing_db,
                    const PropagationModel& model) {
  if (!(distance_m >= 1.0))
    throw std::domain_error("path_loss_db: distance below the 1 m model floor");
  const double lg = std::log10(distance_m);
  if (tag == LinkTag::LOS) return model.los_intercept_db + model.los_slope_db * lg + shadowing_db;
  return model.nlos_intercept_db + model.nlos_slope_db * lg + shadowing_db;
}

CVector upa_steering(double azimuth, double elevation, const ArrayGeometry& geom) {
  if (geom.rows < 1 || geom.cols < 1) throw std::invalid_argument("upa_steering: empty array");
  if (!(azimuth > -kPi && azimuth <= kPi))
    throw std::domain_error("upa_steering: azimuth outside (-pi, pi]");
  if (!(elevation >= -kPi / 2 && elevation <= kPi / 2))
    throw std::domain_error("upa_steering: elevation outside [-pi/2, pi/2]");

  const double k = 2.0 * kPi * geom.element_spacing;
  const double row_phase = k * std::sin(elevation);
  const double col_phase = k * std::sin(azimuth) * std::cos(elevation);
  CVector a(geom.size());
  for (int p = 0; p < geom.rows; ++p)
    for (int q = 0; q < geom.cols; ++q)
      a(p * geom.cols + q) = std::polar(1.0, p * row_phase + q * col_phase);
  return a;
}

int sample_cluster_count(double mean, Rng& rng) {
  if (!(mean > 0.0)) throw std::invalid_argument("sample_cluster_count: mean must be positive");
  std::poisson_distribution<int> poisson(mean);
  return std::max(1, poisson(rng));
}

ClusterSet sample_clusters(const ClusterModel& model, Rng& rng) {
  if (model.rays_per_cluster < 1) throw std::invalid_argument("sample_clusters: no rays");
  const int n_clusters = sample_cluster_count(model.mean_clusters, rng);
  const int total = n_clusters * model.rays_per_cluster;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> az_off(0.0, deg2rad(model.az_spread_deg));
  std::normal_distribution<double> el_off(0.0, deg2rad(model.el_spread_deg));
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / total));

  auto uniform_in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  ClusterSet set;
  set.clusters.reserve(n_clusters);
  for (int c = 0; c < n_clusters; ++c) {
    Cluster cl;
    // pi - 2*pi*U with U in [0, 1) lands in (-pi, pi].
    cl.central.az_aoa = kPi - 2.0 * kPi * unit(rng);
    cl.central.el_aoa = uniform_in(model.user_el_min, model.user_el_max);
    cl.central.az_aod = kPi - 2.0 * kPi * unit(rng);
    cl.central.el_aod = uniform_in(model.bs_el_min, model.bs_el_max);
    for (int r = 0; r < model.rays_per_cluster; ++r) {
      RayAngles off;
      off.az_aoa = az_off(rng);
      off.el_aoa = el_off(rng);
      off.az_aod = az_off(rng);
      off.el_aod = el_off(rng);
      cl.ray_offsets.push_back(off);
      const double re = gauss(rng);
      const double im = gauss(rng);
      cl.ray_gains.emplace_back(re, im);
    }
    set.clusters.push_back(std::move(cl));
  }
  return set;
}

ChannelMatrix synthesize_channel(const ClusterSet& clusters, const ArrayGeometry& bs,
                                 const ArrayGeometry& user, double beta_linear) {
  if (clusters.clusters.empty()) throw std::invalid_argument("synthesize_channel: no clusters");
  CMatrix h = CMatrix::Zero(user.size(), bs.size());
  for (const auto& cl : clusters.clusters) {
    if (cl.ray_offsets.size() != cl.ray_gains.size())
      throw std::invalid_argument("synthesize_channel: ray offsets and gains differ in length");
    for (std::size_t r = 0; r < cl.ray_gains.size(); ++r) {
      const RayAngles& o = cl.ray_offsets[r];
      const CVector ar = upa_steering(wrap_azimuth(cl.central.az_aoa + o.az_aoa),
                                      clamp_elevation(cl.central.el_aoa + o.el_aoa), user);
      const CVector at = upa_steering(wrap_azimuth(cl.central.az_aod + o.az_aod),
                                      clamp_elevation(cl.central.el_aod + o.el_aod), bs);
      h.noalias() += (beta_linear * cl.ray_gains[r]) * ar * at.adjoint();
    }
  }
  if (!h.allFinite()) throw std::runtime_error("synthesize_channel: non-finite channel entries");
  ChannelMatrix out;
  out.h = std::move(h);
  out.beta_linear = beta_linear;
  out.clusters = clusters;
  return out;
}

Position drop_user(double cell_inner_m, double cell_outer_m, Rng& rng) {
  if (!(cell_inner_m > 0.0) || !(cell_inner_m < cell_outer_m))
    throw std::invalid_argument("drop_user: need 0 < inner < outer");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r2_in = cell_inner_m * cell_inner_m;
  const double r2_out = cell_outer_m * cell_outer_m;
  const double r = std::sqrt(r2_in + (r2_out - r2_in) * unit(rng));
  const double phi = 2.0 * kPi * unit(rng);
  return Position{r * std::cos(phi), r * std::sin(phi)};
}

LinkState sample_link(double distance_m, const PropagationModel& model, Rng& rng) {
  if (!(distance_m > 0.0)) throw std::domain_error("sample_link: distance must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LinkState s;
  s.distance_m = distance_m;
  s.tag = unit(rng) < los_probability(distance_m, model) ? LinkTag::LOS : LinkTag::NLOS;
  const double sd =
      s.tag == LinkTag::LOS ? model.los_shadowing_std_db : model.nlos_shadowing_std_db;
  std::normal_distribution<double> shadow(0.0, sd);
  s.shadowing_db = shadow(rng);
  return s;
}

double link_snr_db(const LinkState& link, const PropagationModel& model,
                   const LinkBudget& budget) {
  return budget.bs_power_dbm - path_loss_db(link.distance_m, link.tag, link.shadowing_db, model) -
         budget.noise_floor_dbm();
}

double beta_from_snr_db(double snr_db) { return std::pow(10.0, snr_db / 20.0); }

namespace {

nlohmann::json angles_json(const RayAngles& a) {
  return nlohmann::json::array({a.az_aoa, a.el_aoa, a.az_aod, a.el_aod});
}

RayAngles angles_from(const nlohmann::json& j) {
  return RayAngles{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                   j.at(3).get<double>()};
}

}  // namespace

std::string channel_to_json_line(const ChannelMatrix& ch) {
  nlohmann::json j;
  j["n_r"] = ch.h.rows();
  j["n_t"] = ch.h.cols();
  std::vector<double> re, im;
  re.reserve(ch.h.size());
  im.reserve(ch.h.size());
  for (Eigen::Index r = 0; r < ch.h.rows(); ++r)
    for (Eigen::Index c = 0; c < ch.h.cols(); ++c) {
      re.push_back(ch.h(r, c).real());
      im.push_back(ch.h(r, c).imag());
    }
  j["h_re"] = re;
  j["h_im"] = im;
  j["beta_linear"] = ch.beta_linear;
  j["link"] = {{"tag", ch.link.tag == LinkTag::LOS ? "LOS" : "NLOS"},
               {"distance_m", ch.link.distance_m},
               {"shadowing_db", ch.link.shadowing_db}};
  auto clusters = nlohmann::json::array();
  for (const auto& cl : ch.clusters.clusters) {
    nlohmann::json c;
    c["central"] = angles_json(cl.central);
    auto offs = nlohmann::json::array();
    for (const auto& o : cl.ray_offsets) offs.push_back(angles_json(o));
    c["ray_offsets"] = std::move(offs);
    auto gains = nlohmann::json::array();
    for (const auto& g : cl.ray_gains) gains.push_back({g.real(), g.imag()});
    c["ray_gains"] = std::move(gains);
    clusters.push_back(std::move(c));
  }
  j["clusters"] = std::move(clusters);
  return j.dump();
}

ChannelMatrix channel_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  const auto n_r = j.at("n_r").get<Eigen::Index>();
  const auto n_t = j.at("n_t").get<Eigen::Index>();
  const auto re = j.at("h_re").get<std::vector<double>>();
  const auto im = j.at("h_im").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(re.size()) != n_r * n_t || re.size() != im.size())
    throw std::invalid_argument("channel_from_json_line: matrix size mismatch");
  ChannelMatrix ch;
  ch.h.resize(n_r, n_t);
  for (Eigen::Index r = 0; r < n_r; ++r)
    for (Eigen::Index c = 0; c < n_t; ++c) ch.h(r, c) = {re[r * n_t + c], im[r * n_t + c]};
  ch.beta_linear = j.at("beta_linear").get<double>();
  const auto& l = j.at("link");
  ch.link.tag = l.at("tag").get<std::string>() == "LOS" ? LinkTag::LOS : LinkTag::NLOS;
  ch.link.distance_m = l.at("distance_m").get<double>();
  ch.link.shadowing_db = l.at("shadowing_db").get<double>();
  for (const auto& c : j.at("clusters")) {
    Cluster cl;
    cl.central = angles_from(c.at("central"));
    for (const auto& o : c.at("ray_offsets")) cl.ray_offsets.push_back(angles_from(o));
    for (const auto& g : c.at("ray_gains"))
      cl.ray_gains.emplace_back(g.at(0).get<double>(), g.at(1).get<double>());
    ch.clusters.clusters.push_back(std::move(cl));
  }
  return ch;
}

}  // namespace atr::chanmod
