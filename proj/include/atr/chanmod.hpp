#pragma once

// Clustered mmWave channel synthesis: network geometry, large-scale link
// budget and the sum-of-rays narrowband MIMO channel between BS and user.

#include "atr/common.hpp"

#include <string>
#include <vector>

namespace atr::chanmod {

struct ArrayGeometry {
  int rows = 1;
  int cols = 1;
  double element_spacing = 0.5;  // wavelengths

  int size() const { return rows * cols; }
};

enum class LinkTag { LOS, NLOS };

struct LinkState {
  LinkTag tag = LinkTag::NLOS;
  double distance_m = 1.0;
  double shadowing_db = 0.0;
};

struct RayAngles {
  double az_aoa = 0.0;
  double el_aoa = 0.0;
  double az_aod = 0.0;
  double el_aod = 0.0;
};

struct Cluster {
  RayAngles central;
  std::vector<RayAngles> ray_offsets;  // added to `central`
  std::vector<cdouble> ray_gains;
};

struct ClusterSet {
  std::vector<Cluster> clusters;

  int total_rays() const;
};

struct ChannelMatrix {
  CMatrix h;  // n_r x n_t
  double beta_linear = 1.0;
  LinkState link;
  ClusterSet clusters;
};

// Path loss, LOS probability and shadowing parameters.
struct PropagationModel {
  double los_decay_per_m = 0.0149;
  double los_intercept_db = 61.4;
  double los_slope_db = 20.0;
  double los_shadowing_std_db = 5.8;
  double nlos_intercept_db = 72.0;
  double nlos_slope_db = 29.2;
  double nlos_shadowing_std_db = 8.7;
};

struct LinkBudget {
  double bs_power_dbm = 30.0;
  double noise_psd_dbm_hz = -174.0;
  double bandwidth_hz = 1e9;
  double noise_figure_db = 6.0;

  double noise_floor_dbm() const;
};

// Cluster/ray angle statistics. Elevation ranges are [lo, hi] in radians.
struct ClusterModel {
  double mean_clusters = 1.8;
  int rays_per_cluster = 20;
  double az_spread_deg = 10.0;
  double el_spread_deg = 6.0;
  double user_el_min = -kPi / 2;
  double user_el_max = kPi / 2;
  double bs_el_min = -kPi / 4;
  double bs_el_max = 0.0;
};

struct Position {
  double x = 0.0;
  double y = 0.0;

  double radius() const;
};

double los_probability(double distance_m, const PropagationModel& model = {});

double path_loss_db(double distance_m, LinkTag tag, double shadowing_db,
                    const PropagationModel& model = {});

// Unit-modulus response of a planar array, element (p, q) at index p*cols + q.
CVector upa_steering(double azimuth, double elevation, const ArrayGeometry& geom);

int sample_cluster_count(double mean, Rng& rng);

// Draws cluster centres, per-ray offsets and gains. Ray gains are CN(0, 1/L)
// with L the total ray count, so E||H||_F^2 = beta^2 * n_r * n_t.
ClusterSet sample_clusters(const ClusterModel& model, Rng& rng);

ChannelMatrix synthesize_channel(const ClusterSet& clusters, const ArrayGeometry& bs,
                                 const ArrayGeometry& user, double beta_linear);

// Area-uniform position in the annulus inner < r <= outer.
Position drop_user(double cell_inner_m, double cell_outer_m, Rng& rng);

LinkState sample_link(double distance_m, const PropagationModel& model, Rng& rng);

// Per-antenna receive SNR: P_tx - PL(d, shadowing) - noise floor.
double link_snr_db(const LinkState& link, const PropagationModel& model,
                   const LinkBudget& budget);

// Amplitude scale for unit-variance complex noise and unit total transmit power.
double beta_from_snr_db(double snr_db);

std::string channel_to_json_line(const ChannelMatrix& ch);
ChannelMatrix channel_from_json_line(const std::string& line);

}  // namespace atr::chanmod
