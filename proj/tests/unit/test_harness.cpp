#include "atr/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace atr;
using namespace atr::harness;
namespace fs = std::filesystem;

namespace {

CampaignConfig small_config() {
  CampaignConfig c;
  c.n_drops = 2;
  c.n_users = 3;
  c.bs_array = {4, 4, 0.5};
  c.user_array = {2, 2, 0.5};
  c.pilot_len = 64;
  c.mc_samples = 20000;
  c.master_seed = 17;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("atr_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every leaf of a JSON document, as a JSON pointer.
void leaves(const nlohmann::json& j, const nlohmann::json::json_pointer& at,
            std::vector<nlohmann::json::json_pointer>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) leaves(it.value(), at / it.key(), out);
  } else if (j.is_array() && !j.empty() && j[0].is_number()) {
    for (std::size_t i = 0; i < j.size(); ++i) leaves(j[i], at / i, out);
  } else {
    out.push_back(at);
  }
}

std::vector<nlohmann::json> perturbations(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return {v.get<std::uint64_t>() + 1};
  if (v.is_number_integer()) return {v.get<long>() + 1, v.get<long>() - 1};
  if (v.is_number_float()) {
    const double x = v.get<double>();
    return {x * 1.01 + 1e-3, x * 0.99 - 1e-3};
  }
  if (v.is_string()) return {"iq_pair", "gamp", "bussgang", "single_real"};
  if (v.is_array()) return {nlohmann::json::array({"WP_UA"})};
  return {};
}

}  // namespace

TEST_CASE("scheme labels") {
  CHECK(is_known_scheme("DL_NAIVE_EST"));
  CHECK_FALSE(is_known_scheme("dl_naive"));
  CHECK(is_estimated_scheme("WP_UA_EST"));
  CHECK_FALSE(is_estimated_scheme("WP_UA"));
  CHECK(is_dl_scheme("DL_PROPOSED"));
  CHECK_FALSE(is_dl_scheme("SP_SA"));
}

TEST_CASE("config JSON") {
  const CampaignConfig c = small_config();
  const auto j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);
  CHECK(config_hash(config_from_json(j)) == config_hash(c));
  CHECK(hash_hex(config_hash(c)).size() == 16);

  const CampaignConfig d = config_from_json(nlohmann::json::parse(R"({"n_drops": 7, "gamp": {"damping": 0.3}})"));
  CHECK(d.n_drops == 7);
  CHECK(d.gamp.damping == 0.3);
  CHECK(d.n_users == 10);
  CHECK(d.user_array.size() == 16);

  CHECK_THROWS_WITH(config_from_json(nlohmann::json::parse(R"({"n_dropz": 7})")),
                    doctest::Contains("unknown key 'n_dropz'"));
  CHECK_THROWS_WITH(config_from_json(nlohmann::json::parse(R"({"clusters": {"meen": 2}})")),
                    doctest::Contains("clusters.meen"));
  CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"schemes": ["WP_UA", "WP_UA"]})")));
  CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"pilot_len": 20000})")));
  CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"cell_radius_m": [50, 10]})")));

  const fs::path dir = scratch("cfg");
  std::ofstream(dir / "c.json") << j.dump(2);
  CHECK(config_hash(load_config(dir / "c.json")) == config_hash(c));
  std::ofstream(dir / "bad.json") << "{ nope";
  CHECK_THROWS_WITH(load_config(dir / "bad.json"), doctest::Contains("bad.json"));
}

TEST_CASE("config hash reacts to every field") {
  const CampaignConfig c = small_config();
  const auto base = config_to_json(c);
  std::vector<nlohmann::json::json_pointer> ptrs;
  leaves(base, nlohmann::json::json_pointer(), ptrs);
  CHECK(ptrs.size() >= 35);
  for (const auto& p : ptrs) {
    bool changed = false;
    for (const auto& v : perturbations(base.at(p))) {
      if (v == base.at(p)) continue;
      auto j = base;
      j[p] = v;
      try {
        const CampaignConfig d = config_from_json(j);
        CHECK_MESSAGE(config_hash(d) != config_hash(c), p.to_string());
        changed = true;
        break;
      } catch (const std::invalid_argument&) {
      }
    }
    CHECK_MESSAGE(changed, p.to_string());
  }
}

TEST_CASE("drops are deterministic and well formed") {
  const CampaignConfig c = small_config();
  const auto a = run_drop(c, 1);
  const auto b = run_drop(c, 1);
  CHECK(a == b);
  CHECK(a.size() == static_cast<std::size_t>(c.n_users) * kAllSchemes.size());
  CHECK(run_drop(c, 0) != a);
  for (const auto& r : a) {
    CHECK(r.error.empty());
    CHECK(r.rate_bps_hz >= 0.0);
    CHECK(r.rate_bps_hz <= 8.0);
    CHECK(r.distance_m >= 10.0);
    CHECK(r.distance_m <= 50.0);
    CHECK(r.estimated_csi == is_estimated_scheme(r.scheme));
    CHECK(std::isnan(r.nmse_db) != r.estimated_csi);
    if (!r.estimated_csi) CHECK(r.rate_bps_hz <= r.benchmark_bps_hz);
  }
}

TEST_CASE("single-user downlink equals point to point") {
  CampaignConfig c = small_config();
  c.n_users = 1;
  c.schemes = {"WP_UA", "DL_PROPOSED", "DL_NAIVE", "WP_UA_EST", "DL_PROPOSED_EST"};
  const auto recs = run_drop(c, 0);
  REQUIRE(recs.size() == 5);
  std::map<std::string, DropRecord> by;
  for (const auto& r : recs) by[r.scheme] = r;
  CHECK(by["DL_PROPOSED"].rate_bps_hz == by["WP_UA"].rate_bps_hz);
  CHECK(by["DL_NAIVE"].rate_bps_hz == by["WP_UA"].rate_bps_hz);
  CHECK(by["DL_PROPOSED"].benchmark_bps_hz == by["WP_UA"].benchmark_bps_hz);
  CHECK(by["DL_PROPOSED_EST"].rate_bps_hz == doctest::Approx(by["WP_UA_EST"].rate_bps_hz).epsilon(1e-12));
  CHECK(by["DL_PROPOSED_EST"].benchmark_bps_hz == by["WP_UA_EST"].benchmark_bps_hz);
}

TEST_CASE("campaign results do not depend on the worker count") {
  CampaignConfig c = small_config();
  c.n_drops = 3;
  const auto one = run_campaign(c, 1);
  const auto three = run_campaign(c, 3);
  CHECK(one.records == three.records);
  CHECK(one.error_count == 0);

  std::set<std::string> labels;
  for (const auto& s : one.series) {
    labels.insert(s.label);
    CHECK(std::is_sorted(s.samples.begin(), s.samples.end()));
    if (s.benchmark) CHECK(s.samples.size() == static_cast<std::size_t>(c.n_drops * c.n_users));
  }
  for (const char* l : {"WP_UA", "DL_NAIVE_EST", "SC_PTP", "SC_PTP_OH", "SC_DL", "SC_DL_OH"})
    CHECK(labels.count(l) == 1);
}

TEST_CASE("series skip failed records") {
  std::vector<DropRecord> recs(3);
  for (int i = 0; i < 3; ++i) {
    recs[i].drop_id = i;
    recs[i].scheme = "WP_UA";
    recs[i].rate_bps_hz = 3.0 - i;
    recs[i].benchmark_bps_hz = 5.0;
  }
  recs[1].rate_bps_hz = kNaN;
  recs[1].benchmark_bps_hz = kNaN;
  recs[1].error = "boom";
  const auto s = build_series(recs, {"WP_UA"});
  REQUIRE(s.size() == 2);
  CHECK(s[0].samples == std::vector<double>{1.0, 3.0});
  CHECK(s[1].label == "SC_PTP");
  CHECK(s[1].samples.size() == 2);
  CHECK(median({3.0, 1.0, 2.0, 10.0}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("record files round trip") {
  CampaignConfig c = small_config();
  c.n_drops = 1;
  auto result = run_campaign(c, 1);
  result.records[2].rate_bps_hz = kNaN;
  result.records[2].benchmark_bps_hz = kNaN;
  result.records[2].error = "estimation: \"bad\", retry\nlater";
  result.error_count = 1;
  const fs::path dir = scratch("io");

  write_records_csv(result.records, dir / "r.csv");
  CHECK(read_records_csv(dir / "r.csv") == result.records);
  write_records_jsonl(result.records, dir / "r.jsonl");
  CHECK(read_records_jsonl(dir / "r.jsonl") == result.records);

  std::ofstream(dir / "short.csv") << "drop_id,user_id,scheme\n";
  CHECK_THROWS_WITH(read_records_csv(dir / "short.csv"), doctest::Contains("missing column 'csi'"));
  std::ofstream(dir / "empty.csv");
  CHECK_THROWS(read_records_csv(dir / "empty.csv"));
  CHECK_THROWS_WITH(read_records_csv(dir / "nope.csv"), doctest::Contains("nope.csv"));

  CdfSeries s{"WP_UA", false, {0.5, 1.0, 1.0, 2.5}};
  write_cdf_csv(s, dir / "cdf.csv");
  const auto back = read_cdf_csv(dir / "cdf.csv");
  CHECK(back.label == s.label);
  CHECK(back.samples == s.samples);
  std::istringstream lines(slurp(dir / "cdf.csv"));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "label,benchmark,rate_bps_hz,cdf");
  double prev = 0.0;
  while (std::getline(lines, line)) {
    const double cdf = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(cdf >= prev);
    prev = cdf;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("emitted results") {
  CampaignConfig c = small_config();
  c.n_drops = 1;
  c.schemes = {"WP_UA", "SP_SA"};
  const auto result = run_campaign(c, 1);
  const fs::path a = scratch("emit_a"), b = scratch("emit_b");
  emit_results(result, c, OutputFormat::Csv, a);
  emit_results(run_campaign(c, 2), c, OutputFormat::Csv, b);
  for (const char* f : {"records.csv", "cdf_WP_UA.csv", "cdf_SP_SA.csv", "cdf_SC_PTP.csv", "meta.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto meta = nlohmann::json::parse(slurp(a / "meta.json"));
  CHECK(meta.at("config_hash") == hash_hex(config_hash(c)));
  CHECK(meta.at("master_seed") == c.master_seed);
  CHECK(meta.at("records_file") == "records.csv");
  CHECK(meta.at("n_records") == result.records.size());
  CHECK(meta.at("error_count") == 0);
  CHECK(meta.at("record_columns") == kRecordColumns);
  CHECK(meta.at("series").size() == 3);
  CHECK(config_hash(config_from_json(meta.at("config"))) == config_hash(c));

  const fs::path j = scratch("emit_j");
  emit_results(result, c, OutputFormat::JsonLines, j);
  CHECK(read_records_jsonl(j / "records.jsonl") == result.records);
}

TEST_CASE("estimation sweep") {
  CampaignConfig c = small_config();
  SweepConfig s;
  s.n_trials = 2;
  s.pilot_lengths = {32, 64};
  s.bits = {1, 3};
  const auto pts = estimation_sweep(c, s, 1);
  CHECK(pts.size() == 8);
  CHECK(pts == estimation_sweep(c, s, 2));
  for (const auto& p : pts) CHECK(std::isfinite(p.nmse_db));
  CHECK(pts[0].snr_db == pts[3].snr_db);
  const fs::path dir = scratch("sweep");
  write_sweep_csv(pts, dir / "nmse.csv");
  CHECK(slurp(dir / "nmse.csv").rfind("trial,n_p,bits,snr_db,nmse_db\n", 0) == 0);
  s.bits.clear();
  CHECK_THROWS(estimation_sweep(c, s, 1));
}
