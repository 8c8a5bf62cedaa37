#pragma once

// Monte Carlo campaign driver: user drops, scheme evaluation, empirical CDFs
// and result files.

#include "atr/alloc.hpp"
#include "atr/chanmod.hpp"
#include "atr/chest.hpp"
#include "atr/common.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace atr::harness {

// Scheme labels as they appear in records and file names.
inline const std::vector<std::string> kAllSchemes = {
    "WP_UA", "UP_UA", "SP_SA", "WP_UA_EST",
    "DL_PROPOSED", "DL_NAIVE", "DL_PROPOSED_EST", "DL_NAIVE_EST"};

bool is_known_scheme(const std::string& label);
bool is_estimated_scheme(const std::string& label);
bool is_dl_scheme(const std::string& label);

struct CampaignConfig {
  int n_drops = 500;
  int n_users = 10;
  double cell_radius_inner_m = 10.0;
  double cell_radius_outer_m = 50.0;
  double carrier_frequency_hz = 28e9;  // recorded only; the path-loss fits absorb it
  chanmod::LinkBudget budget;
  chanmod::PropagationModel propagation;
  chanmod::ClusterModel clusters;
  chanmod::ArrayGeometry bs_array{8, 8, 0.5};
  chanmod::ArrayGeometry user_array{4, 4, 0.5};
  double total_power = 1.0;  // normalised; the link budget lives in beta
  int n_q = 8;
  int cap_bits = 4;
  alloc::SelectionMode sp_sa_mode = alloc::SelectionMode::SingleReal;
  int pilot_len = 512;
  int coherence_len = 10240;
  int estimation_bits = 3;
  double agc_loading = 3.0;
  chest::Estimator estimator = chest::Estimator::BussgangLmmse;
  chest::GampOptions gamp;
  long mc_samples = 100000;
  double enumeration_budget = 2e5;
  std::vector<std::string> schemes = kAllSchemes;
  std::uint64_t master_seed = 1;

  void validate() const;  // throws std::invalid_argument
};

nlohmann::json config_to_json(const CampaignConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
CampaignConfig config_from_json(const nlohmann::json& j);
CampaignConfig load_config(const std::filesystem::path& path);
// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const CampaignConfig& cfg);
std::string hash_hex(std::uint64_t h);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One row per (drop, user, scheme).
struct DropRecord {
  int drop_id = 0;
  int user_id = 0;
  std::string scheme;
  bool estimated_csi = false;
  double distance_m = 0.0;
  bool los = false;
  double path_loss_db = 0.0;
  double snr_db = 0.0;
  double rate_bps_hz = kNaN;
  double benchmark_bps_hz = kNaN;
  double nmse_db = kNaN;  // estimated-CSI schemes only
  std::string error;      // empty on success

  bool operator==(const DropRecord& o) const;  // NaN fields compare equal
};

std::vector<DropRecord> run_drop(const CampaignConfig& cfg, int drop_id);

struct CdfSeries {
  std::string label;
  bool benchmark = false;
  std::vector<double> samples;  // sorted
};

struct CampaignResult {
  std::vector<DropRecord> records;  // sorted by (drop, user, scheme order)
  std::vector<CdfSeries> series;
  int error_count = 0;
};

// Deterministic for any worker count (0 picks hardware concurrency).
CampaignResult run_campaign(const CampaignConfig& cfg, int workers = 1);

// Scheme series plus the benchmark series SC_PTP, SC_PTP_OH, SC_DL and
// SC_DL_OH (each once per user) derived from the records.
std::vector<CdfSeries> build_series(const std::vector<DropRecord>& records,
                                    const std::vector<std::string>& schemes);
double median(std::vector<double> v);

enum class OutputFormat { Csv, JsonLines };

// records.csv (or records.jsonl), cdf_<label>.csv per series and meta.json.
void emit_results(const CampaignResult& result, const CampaignConfig& cfg, OutputFormat format,
                  const std::filesystem::path& out_dir);

inline const std::vector<std::string> kRecordColumns = {
    "drop_id", "user_id", "scheme", "csi", "distance_m", "los", "path_loss_db",
    "snr_db", "rate_bps_hz", "benchmark_bps_hz", "nmse_db", "error"};

void write_records_csv(const std::vector<DropRecord>& records, const std::filesystem::path& path);
std::vector<DropRecord> read_records_csv(const std::filesystem::path& path);
void write_records_jsonl(const std::vector<DropRecord>& records, const std::filesystem::path& path);
std::vector<DropRecord> read_records_jsonl(const std::filesystem::path& path);
void write_cdf_csv(const CdfSeries& s, const std::filesystem::path& path);
CdfSeries read_cdf_csv(const std::filesystem::path& path);

// NMSE of the configured estimator over pilot lengths and ADC resolutions;
// every (n_p, bits) cell of one trial reuses the same channel and pilots.
struct SweepPoint {
  int trial = 0;
  int n_p = 0;
  int bits = 0;
  double snr_db = 0.0;
  double nmse_db = 0.0;

  bool operator==(const SweepPoint&) const = default;
};

struct SweepConfig {
  int n_trials = 100;
  std::vector<int> pilot_lengths = {128, 256, 512};
  std::vector<int> bits = {1, 2, 3};
};

std::vector<SweepPoint> estimation_sweep(const CampaignConfig& cfg, const SweepConfig& sweep,
                                         int workers = 1);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::filesystem::path& path);

}  // namespace atr::harness
