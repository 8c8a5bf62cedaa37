#include "atr/harness.hpp"

#include "atr/rate.hpp"
#include "atr/rxq.hpp"
#include "atr/subchan.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>

namespace atr::harness {

using nlohmann::json;

bool is_known_scheme(const std::string& label) {
  return std::find(kAllSchemes.begin(), kAllSchemes.end(), label) != kAllSchemes.end();
}

bool is_estimated_scheme(const std::string& label) {
  return label.size() > 4 && label.compare(label.size() - 4, 4, "_EST") == 0;
}

bool is_dl_scheme(const std::string& label) { return label.rfind("DL_", 0) == 0; }

void CampaignConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(fmt::format("invalid config: {}", what));
  };
  need(n_drops >= 1, "n_drops must be >= 1");
  need(n_users >= 1, "n_users must be >= 1");
  need(cell_radius_inner_m > 0.0 && cell_radius_inner_m < cell_radius_outer_m,
       "cell radii need 0 < inner < outer");
  need(bs_array.rows >= 1 && bs_array.cols >= 1, "bs_antenna must have rows, cols >= 1");
  need(user_array.rows >= 1 && user_array.cols >= 1, "user_antenna must have rows, cols >= 1");
  need(total_power > 0.0, "total_power must be > 0");
  need(n_q >= 1, "n_q must be >= 1");
  need(cap_bits >= 1 && cap_bits <= 4, "cap_bits must be in [1, 4]");
  need(pilot_len >= 1 && pilot_len < coherence_len, "need 1 <= pilot_len < coherence_len");
  need(estimation_bits >= 0 && estimation_bits <= 8, "estimation_bits must be in [0, 8]");
  need(agc_loading > 0.0, "agc_loading must be > 0");
  need(mc_samples >= rxq::kMinMcSamples, "mc_samples below the Monte Carlo minimum");
  need(enumeration_budget >= 0.0, "enumeration_budget must be >= 0");
  need(clusters.mean_clusters > 0.0 && clusters.rays_per_cluster >= 1, "bad cluster model");
  need(!schemes.empty(), "no schemes selected");
  std::set<std::string> seen;
  for (const auto& s : schemes) {
    if (!is_known_scheme(s)) throw std::invalid_argument(fmt::format("invalid config: unknown scheme '{}'", s));
    if (!seen.insert(s).second) throw std::invalid_argument(fmt::format("invalid config: duplicate scheme '{}'", s));
  }
}

// ---- config serialisation ---------------------------------------------------

namespace {

json array_json(const chanmod::ArrayGeometry& g) {
  return {{"rows", g.rows}, {"cols", g.cols}, {"element_spacing", g.element_spacing}};
}

// Reads known keys and rejects the rest, so typos fail loudly.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument(fmt::format("config: '{}' must be an object", where_));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(fmt::format("config: bad value for '{}{}': {}", prefix(), key, e.what()));
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, prefix() + key);
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw std::invalid_argument(fmt::format("config: unknown key '{}{}'", prefix(), k));
  }

 private:
  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_array(Reader r, chanmod::ArrayGeometry& g) {
  r.get("rows", g.rows);
  r.get("cols", g.cols);
  r.get("element_spacing", g.element_spacing);
  r.finish();
}

std::string sp_sa_mode_name(alloc::SelectionMode m) {
  return m == alloc::SelectionMode::SingleReal ? "single_real" : "iq_pair";
}

}  // namespace

json config_to_json(const CampaignConfig& c) {
  json j;
  j["n_drops"] = c.n_drops;
  j["n_users"] = c.n_users;
  j["cell_radius_m"] = {c.cell_radius_inner_m, c.cell_radius_outer_m};
  j["carrier_frequency_hz"] = c.carrier_frequency_hz;
  j["bandwidth_hz"] = c.budget.bandwidth_hz;
  j["noise_spectral_density_dbm_hz"] = c.budget.noise_psd_dbm_hz;
  j["noise_figure_db"] = c.budget.noise_figure_db;
  j["bs_antenna"] = array_json(c.bs_array);
  j["user_antenna"] = array_json(c.user_array);
  j["bs_transmit_power_dbm"] = c.budget.bs_power_dbm;
  j["path_loss_los"] = {{"intercept_db", c.propagation.los_intercept_db},
                        {"slope_db", c.propagation.los_slope_db},
                        {"shadowing_std_db", c.propagation.los_shadowing_std_db}};
  j["path_loss_nlos"] = {{"intercept_db", c.propagation.nlos_intercept_db},
                         {"slope_db", c.propagation.nlos_slope_db},
                         {"shadowing_std_db", c.propagation.nlos_shadowing_std_db}};
  j["probability_of_los_decay_per_m"] = c.propagation.los_decay_per_m;
  j["clusters"] = {{"mean", c.clusters.mean_clusters},
                   {"rays_per_cluster", c.clusters.rays_per_cluster},
                   {"az_spread_deg", c.clusters.az_spread_deg},
                   {"el_spread_deg", c.clusters.el_spread_deg},
                   {"user_el_min_rad", c.clusters.user_el_min},
                   {"user_el_max_rad", c.clusters.user_el_max},
                   {"bs_el_min_rad", c.clusters.bs_el_min},
                   {"bs_el_max_rad", c.clusters.bs_el_max}};
  j["total_power"] = c.total_power;
  j["n_q"] = c.n_q;
  j["cap_bits"] = c.cap_bits;
  j["sp_sa_mode"] = sp_sa_mode_name(c.sp_sa_mode);
  j["pilot_len"] = c.pilot_len;
  j["coherence_len"] = c.coherence_len;
  j["estimation_bits"] = c.estimation_bits;
  j["agc_loading"] = c.agc_loading;
  j["estimator"] = std::string(chest::estimator_name(c.estimator));
  j["gamp"] = {{"max_iter", c.gamp.max_iter},
               {"damping", c.gamp.damping},
               {"em_every", c.gamp.em_every},
               {"tolerance", c.gamp.tolerance}};
  j["mc_samples"] = c.mc_samples;
  j["enumeration_budget"] = c.enumeration_budget;
  j["schemes"] = c.schemes;
  j["master_seed"] = c.master_seed;
  return j;
}

CampaignConfig config_from_json(const json& j) {
  CampaignConfig c;
  Reader r(j, "");
  r.get("n_drops", c.n_drops);
  r.get("n_users", c.n_users);
  if (r.has("cell_radius_m")) {
    const json& radii = r.at("cell_radius_m");
    if (!radii.is_array() || radii.size() != 2)
      throw std::invalid_argument("config: 'cell_radius_m' must be [inner, outer]");
    c.cell_radius_inner_m = radii[0].get<double>();
    c.cell_radius_outer_m = radii[1].get<double>();
  }
  r.get("carrier_frequency_hz", c.carrier_frequency_hz);
  r.get("bandwidth_hz", c.budget.bandwidth_hz);
  r.get("noise_spectral_density_dbm_hz", c.budget.noise_psd_dbm_hz);
  r.get("noise_figure_db", c.budget.noise_figure_db);
  read_array(r.child("bs_antenna"), c.bs_array);
  read_array(r.child("user_antenna"), c.user_array);
  r.get("bs_transmit_power_dbm", c.budget.bs_power_dbm);
  {
    Reader los = r.child("path_loss_los");
    los.get("intercept_db", c.propagation.los_intercept_db);
    los.get("slope_db", c.propagation.los_slope_db);
    los.get("shadowing_std_db", c.propagation.los_shadowing_std_db);
    los.finish();
    Reader nlos = r.child("path_loss_nlos");
    nlos.get("intercept_db", c.propagation.nlos_intercept_db);
    nlos.get("slope_db", c.propagation.nlos_slope_db);
    nlos.get("shadowing_std_db", c.propagation.nlos_shadowing_std_db);
    nlos.finish();
  }
  r.get("probability_of_los_decay_per_m", c.propagation.los_decay_per_m);
  {
    Reader cl = r.child("clusters");
    cl.get("mean", c.clusters.mean_clusters);
    cl.get("rays_per_cluster", c.clusters.rays_per_cluster);
    cl.get("az_spread_deg", c.clusters.az_spread_deg);
    cl.get("el_spread_deg", c.clusters.el_spread_deg);
    cl.get("user_el_min_rad", c.clusters.user_el_min);
    cl.get("user_el_max_rad", c.clusters.user_el_max);
    cl.get("bs_el_min_rad", c.clusters.bs_el_min);
    cl.get("bs_el_max_rad", c.clusters.bs_el_max);
    cl.finish();
  }
  r.get("total_power", c.total_power);
  r.get("n_q", c.n_q);
  r.get("cap_bits", c.cap_bits);
  std::string mode = sp_sa_mode_name(c.sp_sa_mode);
  r.get("sp_sa_mode", mode);
  if (mode == "single_real") c.sp_sa_mode = alloc::SelectionMode::SingleReal;
  else if (mode == "iq_pair") c.sp_sa_mode = alloc::SelectionMode::IqPair;
  else throw std::invalid_argument(fmt::format("config: unknown sp_sa_mode '{}'", mode));
  r.get("pilot_len", c.pilot_len);
  r.get("coherence_len", c.coherence_len);
  r.get("estimation_bits", c.estimation_bits);
  r.get("agc_loading", c.agc_loading);
  std::string est(chest::estimator_name(c.estimator));
  r.get("estimator", est);
  c.estimator = chest::estimator_from_name(est);
  {
    Reader g = r.child("gamp");
    g.get("max_iter", c.gamp.max_iter);
    g.get("damping", c.gamp.damping);
    g.get("em_every", c.gamp.em_every);
    g.get("tolerance", c.gamp.tolerance);
    g.finish();
  }
  r.get("mc_samples", c.mc_samples);
  r.get("enumeration_budget", c.enumeration_budget);
  r.get("schemes", c.schemes);
  r.get("master_seed", c.master_seed);
  r.finish();
  c.validate();
  return c;
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(fmt::format("config '{}': {}", path.string(), e.what()));
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const CampaignConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(cfg).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

bool DropRecord::operator==(const DropRecord& o) const {
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return drop_id == o.drop_id && user_id == o.user_id && scheme == o.scheme &&
         estimated_csi == o.estimated_csi && same(distance_m, o.distance_m) && los == o.los &&
         same(path_loss_db, o.path_loss_db) && same(snr_db, o.snr_db) &&
         same(rate_bps_hz, o.rate_bps_hz) && same(benchmark_bps_hz, o.benchmark_bps_hz) &&
         same(nmse_db, o.nmse_db) && error == o.error;
}

// ---- drops ------------------------------------------------------------------

namespace {

enum Stream : std::uint64_t { kUser = 1, kEstimation = 2, kRateMc = 3, kSweep = 4 };

std::uint64_t scheme_order(const std::string& s) {
  return static_cast<std::uint64_t>(std::find(kAllSchemes.begin(), kAllSchemes.end(), s) -
                                    kAllSchemes.begin());
}

struct UserLink {
  double distance_m = 0.0;
  chanmod::LinkState link;
  double path_loss_db = 0.0;
  double snr_db = 0.0;
  chanmod::ChannelMatrix channel;
};

UserLink draw_user(const CampaignConfig& cfg, Rng& rng) {
  UserLink u;
  u.distance_m = chanmod::drop_user(cfg.cell_radius_inner_m, cfg.cell_radius_outer_m, rng).radius();
  u.link = chanmod::sample_link(u.distance_m, cfg.propagation, rng);
  u.path_loss_db = chanmod::path_loss_db(u.distance_m, u.link.tag, u.link.shadowing_db, cfg.propagation);
  u.snr_db = chanmod::link_snr_db(u.link, cfg.propagation, cfg.budget);
  const chanmod::ClusterSet cl = chanmod::sample_clusters(cfg.clusters, rng);
  u.channel = chanmod::synthesize_channel(cl, cfg.bs_array, cfg.user_array,
                                          chanmod::beta_from_snr_db(u.snr_db));
  u.channel.link = u.link;
  return u;
}

chest::PilotConfig pilot_config(const CampaignConfig& cfg) {
  chest::PilotConfig p;
  p.n_p = cfg.pilot_len;
  p.bits_per_dim = cfg.estimation_bits;
  p.agc_loading = cfg.agc_loading;
  p.power = cfg.total_power;
  p.noise_var = 1.0;
  p.estimator = cfg.estimator;
  p.gamp = cfg.gamp;
  return p;
}

struct EstimatedDesign {
  double nmse_db = 0.0;
  subchan::SubchannelDecomposition design;
  subchan::EffectiveChannel effective;
};

class UserEvaluator {
 public:
  UserEvaluator(const CampaignConfig& cfg, const chest::AngularDictionaries* dicts,
                const UserLink& user, int drop_id, int user_id)
      : cfg_(cfg), dicts_(dicts), user_(user), drop_(drop_id), uid_(user_id) {}

  rate::RateReport evaluate(const std::string& scheme) {
    const bool est = is_estimated_scheme(scheme);
    const auto& dec = truth();
    if (!est) {
      if (scheme == "WP_UA") return ptp(dec, alloc::wp_ua(dec.sigma, cfg_.total_power, cfg_.n_q), rate::Scheme::WP_UA);
      if (scheme == "UP_UA") return ptp(dec, alloc::up_ua(dec.sigma, cfg_.total_power, cfg_.n_q), rate::Scheme::UP_UA);
      if (scheme == "SP_SA")
        return ptp(dec, alloc::sp_sa(dec.sigma, cfg_.total_power, cfg_.n_q, cfg_.sp_sa_mode), rate::Scheme::SP_SA);
      const auto a = alloc::wp_ua(dec.sigma, cfg_.total_power, cfg_.n_q);
      const auto mode = scheme == "DL_PROPOSED" ? rate::TdmaMode::Proposed : rate::TdmaMode::Naive;
      return rate::dl_user_rate(dec, a, cfg_.n_users, mode, rate::Csi::perfect(), cfg_.cap_bits);
    }
    const EstimatedDesign& ed = estimated();
    rate::EstimatedCsi csi;
    csi.effective = &ed.effective;
    csi.true_sigma = dec.sigma;
    csi.pilot_len = cfg_.pilot_len;
    csi.coherence_len = cfg_.coherence_len;
    csi.mc_samples = cfg_.mc_samples;
    csi.enumeration_budget = cfg_.enumeration_budget;
    csi.seed = derive_seed(cfg_.master_seed, {static_cast<std::uint64_t>(drop_), static_cast<std::uint64_t>(uid_),
                                              kRateMc, scheme_order(scheme)});
    const auto a = alloc::wp_ua(ed.design.sigma, cfg_.total_power, cfg_.n_q);
    const auto c = rate::Csi::from_estimate(csi);
    if (scheme == "WP_UA_EST") return rate::ptp_rate(ed.design, a, c, rate::Scheme::WP_UA, cfg_.cap_bits);
    const auto mode = scheme == "DL_PROPOSED_EST" ? rate::TdmaMode::Proposed : rate::TdmaMode::Naive;
    return rate::dl_user_rate(ed.design, a, cfg_.n_users, mode, c, cfg_.cap_bits);
  }

  double nmse_db() { return estimated().nmse_db; }

 private:
  rate::RateReport ptp(const subchan::SubchannelDecomposition& dec, const alloc::Allocation& a,
                       rate::Scheme tag) const {
    return rate::ptp_rate(dec, a, rate::Csi::perfect(), tag, cfg_.cap_bits);
  }

  const RMatrix& truth_real() {
    if (!h_real_) h_real_ = subchan::noise_normalized_real(user_.channel.h);
    return *h_real_;
  }

  const subchan::SubchannelDecomposition& truth() {
    if (!truth_) truth_ = subchan::svd_subchannels(truth_real());
    return *truth_;
  }

  // Estimation failures are remembered so every estimated scheme reports them.
  const EstimatedDesign& estimated() {
    if (est_error_) std::rethrow_exception(est_error_);
    if (est_) return *est_;
    try {
      Rng rng = make_rng(cfg_.master_seed, {static_cast<std::uint64_t>(drop_),
                                            static_cast<std::uint64_t>(uid_), kEstimation});
      const double beta = user_.channel.beta_linear;
      const auto res = chest::estimate_channel(user_.channel.h, beta * beta, *dicts_, pilot_config(cfg_), rng);
      EstimatedDesign ed;
      ed.nmse_db = res.nmse_db;
      ed.design = subchan::svd_subchannels(subchan::noise_normalized_real(res.estimate.h_hat));
      ed.effective = subchan::effective_channel(truth_real(), ed.design);
      est_ = std::move(ed);
    } catch (...) {
      est_error_ = std::current_exception();
      throw;
    }
    return *est_;
  }

  const CampaignConfig& cfg_;
  const chest::AngularDictionaries* dicts_;
  const UserLink& user_;
  int drop_;
  int uid_;
  std::optional<RMatrix> h_real_;
  std::optional<subchan::SubchannelDecomposition> truth_;
  std::optional<EstimatedDesign> est_;
  std::exception_ptr est_error_;
};

}  // namespace

std::vector<DropRecord> run_drop(const CampaignConfig& cfg, int drop_id) {
  cfg.validate();
  const bool any_est = std::any_of(cfg.schemes.begin(), cfg.schemes.end(), is_estimated_scheme);
  std::optional<chest::AngularDictionaries> dicts;
  if (any_est) dicts = chest::make_dictionaries(cfg.user_array, cfg.bs_array);

  std::vector<std::string> ordered = cfg.schemes;
  std::sort(ordered.begin(), ordered.end(),
            [](const std::string& a, const std::string& b) { return scheme_order(a) < scheme_order(b); });

  std::vector<DropRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_users) * ordered.size());
  for (int uid = 0; uid < cfg.n_users; ++uid) {
    Rng rng = make_rng(cfg.master_seed, {static_cast<std::uint64_t>(drop_id), static_cast<std::uint64_t>(uid), kUser});
    DropRecord base;
    base.drop_id = drop_id;
    base.user_id = uid;
    std::optional<UserLink> user;
    std::string user_error;
    try {
      user = draw_user(cfg, rng);
      base.distance_m = user->distance_m;
      base.los = user->link.tag == chanmod::LinkTag::LOS;
      base.path_loss_db = user->path_loss_db;
      base.snr_db = user->snr_db;
    } catch (const std::exception& e) {
      user_error = fmt::format("channel: {}", e.what());
    }

    std::optional<UserEvaluator> ev;
    if (user) ev.emplace(cfg, dicts ? &*dicts : nullptr, *user, drop_id, uid);
    for (const auto& scheme : ordered) {
      DropRecord r = base;
      r.scheme = scheme;
      r.estimated_csi = is_estimated_scheme(scheme);
      if (!ev) {
        r.error = user_error;
        out.push_back(std::move(r));
        continue;
      }
      try {
        const rate::RateReport rep = ev->evaluate(scheme);
        r.rate_bps_hz = rep.total_bps_per_hz;
        r.benchmark_bps_hz = rep.benchmark_truncated;
        if (r.estimated_csi) r.nmse_db = ev->nmse_db();
      } catch (const std::exception& e) {
        r.rate_bps_hz = kNaN;
        r.benchmark_bps_hz = kNaN;
        r.error = e.what();
        std::replace(r.error.begin(), r.error.end(), '\n', ' ');
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace {

// Runs task(i) for i in [0, n) on up to `workers` threads.
template <class Task>
void parallel_for(int n, int workers, Task task) {
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto loop = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg, int workers) {
  cfg.validate();
  std::vector<std::vector<DropRecord>> per_drop(cfg.n_drops);
  parallel_for(cfg.n_drops, workers, [&](int d) { per_drop[d] = run_drop(cfg, d); });

  CampaignResult res;
  for (auto& recs : per_drop)
    for (auto& r : recs) {
      if (!r.error.empty()) ++res.error_count;
      res.records.push_back(std::move(r));
    }
  res.series = build_series(res.records, cfg.schemes);
  return res;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<CdfSeries> build_series(const std::vector<DropRecord>& records,
                                    const std::vector<std::string>& schemes) {
  std::vector<std::string> ordered = schemes;
  std::sort(ordered.begin(), ordered.end(),
            [](const std::string& a, const std::string& b) { return scheme_order(a) < scheme_order(b); });
  std::map<std::string, std::vector<double>> rates;
  for (const auto& r : records)
    if (std::isfinite(r.rate_bps_hz)) rates[r.scheme].push_back(r.rate_bps_hz);

  // One benchmark sample per user: the first record of the family carrying one.
  struct Family {
    const char* label;
    std::vector<std::string> sources;
  };
  const std::vector<Family> families = {
      {"SC_PTP", {"WP_UA", "UP_UA", "SP_SA"}},
      {"SC_PTP_OH", {"WP_UA_EST"}},
      {"SC_DL", {"DL_PROPOSED", "DL_NAIVE"}},
      {"SC_DL_OH", {"DL_PROPOSED_EST", "DL_NAIVE_EST"}},
  };
  std::map<std::string, std::map<std::pair<int, int>, double>> bench;
  for (const auto& r : records) {
    if (!std::isfinite(r.benchmark_bps_hz)) continue;
    for (const auto& f : families)
      if (std::find(f.sources.begin(), f.sources.end(), r.scheme) != f.sources.end())
        bench[f.label].try_emplace({r.drop_id, r.user_id}, r.benchmark_bps_hz);
  }

  std::vector<CdfSeries> out;
  for (const auto& s : ordered) {
    auto it = rates.find(s);
    if (it == rates.end()) continue;
    CdfSeries c{s, false, it->second};
    std::sort(c.samples.begin(), c.samples.end());
    out.push_back(std::move(c));
  }
  for (const auto& f : families) {
    auto it = bench.find(f.label);
    if (it == bench.end()) continue;
    CdfSeries c{f.label, true, {}};
    for (const auto& [key, v] : it->second) c.samples.push_back(v);
    std::sort(c.samples.begin(), c.samples.end());
    out.push_back(std::move(c));
  }
  return out;
}

// ---- estimation sweep -------------------------------------------------------

std::vector<SweepPoint> estimation_sweep(const CampaignConfig& cfg, const SweepConfig& sweep,
                                         int workers) {
  cfg.validate();
  if (sweep.n_trials < 1) throw std::invalid_argument("estimation_sweep: n_trials must be >= 1");
  if (sweep.pilot_lengths.empty() || sweep.bits.empty())
    throw std::invalid_argument("estimation_sweep: empty grid");
  const auto dicts = chest::make_dictionaries(cfg.user_array, cfg.bs_array);
  const std::size_t cells = sweep.pilot_lengths.size() * sweep.bits.size();
  std::vector<SweepPoint> points(static_cast<std::size_t>(sweep.n_trials) * cells);

  parallel_for(sweep.n_trials, workers, [&](int t) {
    Rng rng = make_rng(cfg.master_seed, {kSweep, static_cast<std::uint64_t>(t), kUser});
    const UserLink user = draw_user(cfg, rng);
    const double beta = user.channel.beta_linear;
    std::size_t slot = static_cast<std::size_t>(t) * cells;
    for (int n_p : sweep.pilot_lengths)
      for (int bits : sweep.bits) {
        chest::PilotConfig pc = pilot_config(cfg);
        pc.n_p = n_p;
        pc.bits_per_dim = bits;
        Rng pilot_rng = make_rng(cfg.master_seed, {kSweep, static_cast<std::uint64_t>(t), kEstimation});
        const auto res = chest::estimate_channel(user.channel.h, beta * beta, dicts, pc, pilot_rng);
        points[slot++] = SweepPoint{t, n_p, bits, user.snr_db, res.nmse_db};
      }
  });
  return points;
}

}  // namespace atr::harness
