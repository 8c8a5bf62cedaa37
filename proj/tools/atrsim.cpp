// atrsim: campaign runner for the adaptive-threshold receiver simulator.

#include "atr/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>

namespace {

using atr::harness::CampaignConfig;

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  int drops = 0;
  std::string out_dir = "out";
  std::vector<std::string> schemes;
  int workers = 1;
  std::string format = "csv";
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--drops", o.drops, "Number of drops")->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out_dir, "Output directory");
  sub->add_option("--workers", o.workers, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

void add_schemes(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--schemes", o.schemes, "Comma-separated scheme labels")->delimiter(',');
  sub->add_option("--format", o.format, "Record format")->check(CLI::IsMember({"csv", "jsonl"}));
}

// Precedence: command line, then the config file, then the subcommand default.
CampaignConfig resolve(const CommonOptions& o, const CLI::App* sub,
                       const std::vector<std::string>& default_schemes) {
  CampaignConfig cfg;
  bool file_has_schemes = false;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    const auto j = nlohmann::json::parse(in);
    file_has_schemes = j.contains("schemes");
    cfg = atr::harness::config_from_json(j);
  }
  if (!file_has_schemes) cfg.schemes = default_schemes;
  if (sub->count("--seed")) cfg.master_seed = o.seed;
  if (o.drops > 0) cfg.n_drops = o.drops;
  if (!o.schemes.empty()) cfg.schemes = o.schemes;
  cfg.validate();
  return cfg;
}

int run_campaign_command(const CommonOptions& o, const CLI::App* sub,
                         const std::vector<std::string>& default_schemes) {
  const CampaignConfig cfg = resolve(o, sub, default_schemes);
  const auto result = atr::harness::run_campaign(cfg, o.workers);
  const auto fmt_kind = o.format == "csv" ? atr::harness::OutputFormat::Csv : atr::harness::OutputFormat::JsonLines;
  atr::harness::emit_results(result, cfg, fmt_kind, o.out_dir);
  fmt::print("{} records, {} errors, config {} -> {}\n", result.records.size(), result.error_count,
             atr::harness::hash_hex(atr::harness::config_hash(cfg)), o.out_dir);
  for (const auto& s : result.series)
    fmt::print("  {:<16} n={:<6} median={:.4f} bps/Hz\n", s.label, s.samples.size(),
               atr::harness::median(s.samples));
  return result.error_count == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo mmWave MIMO simulator with adaptive-threshold one-bit ADC receivers"};
  app.require_subcommand(1);

  CommonOptions o;
  auto* ptp = app.add_subcommand("ptp-perfect", "Point-to-point allocation heuristics with perfect CSI");
  auto* ptp_est = app.add_subcommand("ptp-estimated", "Point-to-point WP-UA with estimated CSI");
  auto* dl = app.add_subcommand("dl", "Downlink TDMA, proposed and naive, perfect and estimated CSI");
  auto* all = app.add_subcommand("campaign", "Every scheme in one campaign");
  for (auto* sub : {ptp, ptp_est, dl, all}) {
    add_common(sub, o);
    add_schemes(sub, o);
  }

  auto* sweep = app.add_subcommand("estimation-sweep", "Channel-estimation NMSE over pilot length and ADC bits");
  add_common(sweep, o);
  atr::harness::SweepConfig sw;
  sweep->add_option("--trials", sw.n_trials, "Channel draws per grid cell")->check(CLI::PositiveNumber);
  sweep->add_option("--pilots", sw.pilot_lengths, "Pilot lengths")->delimiter(',');
  sweep->add_option("--bits", sw.bits, "Bits per real dimension (0 = unquantized)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (ptp->parsed()) return run_campaign_command(o, ptp, {"WP_UA", "UP_UA", "SP_SA"});
    if (ptp_est->parsed()) return run_campaign_command(o, ptp_est, {"WP_UA", "WP_UA_EST"});
    if (dl->parsed())
      return run_campaign_command(o, dl, {"DL_PROPOSED", "DL_NAIVE", "DL_PROPOSED_EST", "DL_NAIVE_EST"});
    if (all->parsed()) return run_campaign_command(o, all, atr::harness::kAllSchemes);

    const CampaignConfig cfg = resolve(o, sweep, atr::harness::kAllSchemes);
    const auto points = atr::harness::estimation_sweep(cfg, sw, o.workers);
    std::filesystem::create_directories(o.out_dir);
    atr::harness::write_sweep_csv(points, std::filesystem::path(o.out_dir) / "nmse.csv");
    for (int n_p : sw.pilot_lengths)
      for (int bits : sw.bits) {
        std::vector<double> v;
        for (const auto& p : points)
          if (p.n_p == n_p && p.bits == bits) v.push_back(p.nmse_db);
        fmt::print("n_p={:<5} bits={}  median NMSE {:.2f} dB\n", n_p, bits, atr::harness::median(v));
      }
    return 0;
  } catch (const std::exception& e) {
    fmt::print(stderr, "atrsim: {}\n", e.what());
    return 1;
  }
}
