#include "atr/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace atr::harness {

using nlohmann::json;

namespace {

std::string num(double x) { return std::isnan(x) ? std::string() : fmt::format("{}", x); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

// Splits one CSV line; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& ctx) {
  if (s.empty()) return kNaN;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(fmt::format("{}: cannot parse number '{}'", ctx, s));
  return v;
}

int parse_int(const std::string& s, const std::string& ctx) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(fmt::format("{}: cannot parse integer '{}'", ctx, s));
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

// Reads one CSV record; quoted fields may span lines.
bool read_record(std::istream& in, std::string& line, int& lineno) {
  if (!std::getline(in, line)) return false;
  ++lineno;
  std::string more;
  while (std::count(line.begin(), line.end(), '"') % 2 != 0 && std::getline(in, more)) {
    ++lineno;
    line += '\n';
    line += more;
  }
  return true;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", path.string()));
  return in;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

json nullable(double x) { return std::isnan(x) ? json(nullptr) : json(x); }
double from_nullable(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void write_records_csv(const std::vector<DropRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << join(kRecordColumns) << '\n';
  for (const auto& r : records) {
    out << r.drop_id << ',' << r.user_id << ',' << csv_field(r.scheme) << ','
        << (r.estimated_csi ? "estimated" : "perfect") << ',' << num(r.distance_m) << ','
        << (r.los ? 1 : 0) << ',' << num(r.path_loss_db) << ',' << num(r.snr_db) << ','
        << num(r.rate_bps_hz) << ',' << num(r.benchmark_bps_hz) << ',' << num(r.nmse_db) << ','
        << csv_field(r.error) << '\n';
  }
  check_written(out, path);
}

std::vector<DropRecord> read_records_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(fmt::format("'{}': empty file", path.string()));
  const auto header = split_csv(line);
  for (const auto& col : kRecordColumns)
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw std::runtime_error(fmt::format("'{}': missing column '{}'", path.string(), col));
  if (header != kRecordColumns)
    throw std::runtime_error(fmt::format("'{}': unexpected column order", path.string()));

  std::vector<DropRecord> out;
  int lineno = 1;
  while (read_record(in, line, lineno)) {
    if (line.empty()) continue;
    const std::string ctx = fmt::format("{}:{}", path.string(), lineno);
    const auto f = split_csv(line);
    if (f.size() != kRecordColumns.size())
      throw std::runtime_error(fmt::format("{}: expected {} fields, got {}", ctx, kRecordColumns.size(), f.size()));
    DropRecord r;
    r.drop_id = parse_int(f[0], ctx);
    r.user_id = parse_int(f[1], ctx);
    r.scheme = f[2];
    if (f[3] != "perfect" && f[3] != "estimated")
      throw std::runtime_error(fmt::format("{}: bad csi value '{}'", ctx, f[3]));
    r.estimated_csi = f[3] == "estimated";
    r.distance_m = parse_double(f[4], ctx);
    r.los = parse_int(f[5], ctx) != 0;
    r.path_loss_db = parse_double(f[6], ctx);
    r.snr_db = parse_double(f[7], ctx);
    r.rate_bps_hz = parse_double(f[8], ctx);
    r.benchmark_bps_hz = parse_double(f[9], ctx);
    r.nmse_db = parse_double(f[10], ctx);
    r.error = f[11];
    out.push_back(std::move(r));
  }
  return out;
}

void write_records_jsonl(const std::vector<DropRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) {
    json j = {{"drop_id", r.drop_id},
              {"user_id", r.user_id},
              {"scheme", r.scheme},
              {"csi", r.estimated_csi ? "estimated" : "perfect"},
              {"distance_m", r.distance_m},
              {"los", r.los ? 1 : 0},
              {"path_loss_db", r.path_loss_db},
              {"snr_db", r.snr_db},
              {"rate_bps_hz", nullable(r.rate_bps_hz)},
              {"benchmark_bps_hz", nullable(r.benchmark_bps_hz)},
              {"nmse_db", nullable(r.nmse_db)},
              {"error", r.error}};
    out << j.dump() << '\n';
  }
  check_written(out, path);
}

std::vector<DropRecord> read_records_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<DropRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      DropRecord r;
      r.drop_id = j.at("drop_id").get<int>();
      r.user_id = j.at("user_id").get<int>();
      r.scheme = j.at("scheme").get<std::string>();
      r.estimated_csi = j.at("csi").get<std::string>() == "estimated";
      r.distance_m = from_nullable(j.at("distance_m"));
      r.los = j.at("los").get<int>() != 0;
      r.path_loss_db = from_nullable(j.at("path_loss_db"));
      r.snr_db = from_nullable(j.at("snr_db"));
      r.rate_bps_hz = from_nullable(j.at("rate_bps_hz"));
      r.benchmark_bps_hz = from_nullable(j.at("benchmark_bps_hz"));
      r.nmse_db = from_nullable(j.at("nmse_db"));
      r.error = j.at("error").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void write_cdf_csv(const CdfSeries& s, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "label,benchmark,rate_bps_hz,cdf\n";
  const double n = static_cast<double>(s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    out << csv_field(s.label) << ',' << (s.benchmark ? 1 : 0) << ',' << num(s.samples[i]) << ','
        << num(static_cast<double>(i + 1) / n) << '\n';
  check_written(out, path);
}

CdfSeries read_cdf_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "label,benchmark,rate_bps_hz,cdf")
    throw std::runtime_error(fmt::format("'{}': not a CDF file", path.string()));
  CdfSeries s;
  int lineno = 1;
  while (read_record(in, line, lineno)) {
    if (line.empty()) continue;
    const std::string ctx = fmt::format("{}:{}", path.string(), lineno);
    const auto f = split_csv(line);
    if (f.size() != 4) throw std::runtime_error(fmt::format("{}: expected 4 fields", ctx));
    s.label = f[0];
    s.benchmark = parse_int(f[1], ctx) != 0;
    s.samples.push_back(parse_double(f[2], ctx));
  }
  return s;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "trial,n_p,bits,snr_db,nmse_db\n";
  for (const auto& p : points)
    out << p.trial << ',' << p.n_p << ',' << p.bits << ',' << num(p.snr_db) << ',' << num(p.nmse_db) << '\n';
  check_written(out, path);
}

void emit_results(const CampaignResult& result, const CampaignConfig& cfg, OutputFormat format,
                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  const std::string records_name = format == OutputFormat::Csv ? "records.csv" : "records.jsonl";
  if (format == OutputFormat::Csv) write_records_csv(result.records, out_dir / records_name);
  else write_records_jsonl(result.records, out_dir / records_name);

  json series = json::array();
  for (const auto& s : result.series) {
    const std::string file = fmt::format("cdf_{}.csv", s.label);
    write_cdf_csv(s, out_dir / file);
    series.push_back({{"label", s.label},
                      {"benchmark", s.benchmark},
                      {"file", file},
                      {"n", s.samples.size()},
                      {"median_bps_hz", s.samples.empty() ? json(nullptr) : json(median(s.samples))}});
  }
  const json meta = {{"config", config_to_json(cfg)},
                     {"config_hash", hash_hex(config_hash(cfg))},
                     {"master_seed", cfg.master_seed},
                     {"records_file", records_name},
                     {"record_columns", kRecordColumns},
                     {"n_records", result.records.size()},
                     {"error_count", result.error_count},
                     {"series", series}};
  const auto path = out_dir / "meta.json";
  auto out = open_out(path);
  out << meta.dump(2) << '\n';
  check_written(out, path);
}

}  // namespace atr::harness
