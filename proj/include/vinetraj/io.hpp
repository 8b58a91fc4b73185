#pragma once

#include "vinetraj/core.hpp"
#include "vinetraj/model.hpp"
#include "vinetraj/plant.hpp"
#include "vinetraj/sysid.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace vinetraj::io {

/// Thrown when a required input file does not exist (distinct from parse
/// failures so callers can map it to the right exit code).
struct MissingFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Write via a temp file in the same directory plus rename, so readers never
/// observe a truncated file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("atomic_write: short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingFileError("missing file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline constexpr const char* kFlightLogHeader =
    "t,ux,uy,uz,qrx,qry,qrz,qvx,qvy,qvz,eex,eey,eez";

namespace detail {

inline double parse_double(std::string_view field, const std::string& context) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error(context + ": bad numeric field '" + std::string(field) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

inline std::string flight_log_to_csv(const FlightLog& log) {
  if (log.states.size() != log.controls.size()) {
    throw std::invalid_argument("flight log: states/controls length mismatch");
  }
  std::string out = kFlightLogHeader;
  out += '\n';
  for (size_t k = 0; k < log.states.size(); ++k) {
    out += format_double(static_cast<double>(k) * log.dt);
    for (int i = 0; i < kControlDim; ++i) {
      out += ',';
      out += format_double(log.controls[k](i));
    }
    for (int i = 0; i < kStateDim; ++i) {
      out += ',';
      out += format_double(log.states[k](i));
    }
    out += '\n';
  }
  return out;
}

inline FlightLog flight_log_from_csv(const std::string& text, const std::string& name) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != kFlightLogHeader) {
    throw std::runtime_error(name + ": expected CSV header '" + kFlightLogHeader + "'");
  }
  FlightLog log;
  std::vector<double> times;
  for (size_t li = 1; li < lines.size(); ++li) {
    const auto fields = detail::split_csv_line(lines[li]);
    if (fields.size() != 13) {
      throw std::runtime_error(name + ": row " + std::to_string(li) +
                               " has " + std::to_string(fields.size()) +
                               " columns, expected 13");
    }
    const std::string ctx = name + ": row " + std::to_string(li);
    times.push_back(detail::parse_double(fields[0], ctx));
    Control u;
    for (int i = 0; i < 3; ++i) u(i) = detail::parse_double(fields[1 + i], ctx);
    State x;
    for (int i = 0; i < 9; ++i) x(i) = detail::parse_double(fields[4 + i], ctx);
    log.controls.push_back(u);
    log.states.push_back(x);
  }
  if (log.states.empty()) throw std::runtime_error(name + ": no data rows");
  if (times.size() >= 2) {
    log.dt = times[1] - times[0];
    if (log.dt <= 0.0) throw std::runtime_error(name + ": time must be strictly increasing");
    for (size_t k = 0; k < times.size(); ++k) {
      if (std::abs(times[k] - static_cast<double>(k) * log.dt) > 1e-6) {
        throw std::runtime_error(name + ": time not on a uniform grid");
      }
    }
  }
  return log;
}

inline void write_flight_log(const std::filesystem::path& path, const FlightLog& log) {
  atomic_write(path, flight_log_to_csv(log));
}

inline FlightLog read_flight_log(const std::filesystem::path& path) {
  return flight_log_from_csv(read_file(path), path.filename().string());
}

/// Sidecar metadata describing how a log was produced.
struct LogMeta {
  double dt = kDt;
  uint64_t seed = 0;
  VineConfig cfg;
  std::vector<VineConfig> schedule;  // present when the config varied per step
  plant::PlantParams params;
  std::string script;
  std::string label;
};

inline std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

inline nlohmann::json config_to_json(const VineConfig& c) {
  return {{"pressure_kpa", c.pressure_kpa}, {"length_m", c.length_m}};
}

inline VineConfig config_from_json(const nlohmann::json& j) {
  VineConfig c;
  c.pressure_kpa = j.at("pressure_kpa").get<double>();
  c.length_m = j.at("length_m").get<double>();
  return c;
}

inline nlohmann::json plant_params_to_json(const plant::PlantParams& p) {
  return {{"omega_n", p.omega_n}, {"zeta", p.zeta},   {"k0", p.k0},
          {"k1", p.k1},           {"c_damp", p.c_damp}, {"g", p.g},
          {"noise_sigma", p.noise_sigma}};
}

inline plant::PlantParams plant_params_from_json(const nlohmann::json& j) {
  plant::PlantParams p;
  p.omega_n = j.at("omega_n").get<double>();
  p.zeta = j.at("zeta").get<double>();
  p.k0 = j.at("k0").get<double>();
  p.k1 = j.at("k1").get<double>();
  p.c_damp = j.at("c_damp").get<double>();
  p.g = j.at("g").get<double>();
  p.noise_sigma = j.at("noise_sigma").get<double>();
  return p;
}

inline void write_log_meta(const std::filesystem::path& path, const LogMeta& meta) {
  nlohmann::json j;
  j["dt"] = meta.dt;
  j["seed"] = meta.seed;
  j["config"] = config_to_json(meta.cfg);
  if (!meta.schedule.empty()) {
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& c : meta.schedule) sched.push_back(config_to_json(c));
    j["config_schedule"] = std::move(sched);
  }
  j["plant_params"] = plant_params_to_json(meta.params);
  if (!meta.script.empty()) j["script"] = meta.script;
  if (!meta.label.empty()) j["config_label"] = meta.label;
  atomic_write(path, j.dump(2) + "\n");
}

inline LogMeta read_log_meta(const std::filesystem::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  LogMeta meta;
  meta.dt = j.at("dt").get<double>();
  meta.seed = j.at("seed").get<uint64_t>();
  meta.cfg = config_from_json(j.at("config"));
  if (j.contains("config_schedule")) {
    for (const auto& c : j.at("config_schedule")) meta.schedule.push_back(config_from_json(c));
  }
  meta.params = plant_params_from_json(j.at("plant_params"));
  if (j.contains("script")) meta.script = j.at("script").get<std::string>();
  if (j.contains("config_label")) meta.label = j.at("config_label").get<std::string>();
  return meta;
}

inline nlohmann::json fit_report_to_json(const sysid::FitReport& rep) {
  nlohmann::json j;
  j["one_step_rmse"] = std::vector<double>(rep.one_step_rmse.data(),
                                           rep.one_step_rmse.data() + kStateDim);
  j["ee_rmse_m"] = rep.ee_rmse;
  j["divergence_horizon_steps"] = rep.divergence_horizon;
  j["condition_number"] = rep.condition_number;
  return j;
}

inline nlohmann::json model_to_json(const DynModel& m) {
  nlohmann::json j;
  j["feature_version"] = m.feature_version;
  j["dt"] = m.dt;
  j["config"] = config_to_json(m.cfg);
  nlohmann::json a_rows = nlohmann::json::array();
  for (int r = 0; r < kStateDim; ++r) {
    a_rows.push_back(std::vector<double>(m.A.row(r).begin(), m.A.row(r).end()));
  }
  j["A"] = std::move(a_rows);
  nlohmann::json b_rows = nlohmann::json::array();
  for (int r = 0; r < kStateDim; ++r) {
    b_rows.push_back(std::vector<double>(m.B.row(r).begin(), m.B.row(r).end()));
  }
  j["B"] = std::move(b_rows);
  j["a"] = std::vector<double>(m.a.data(), m.a.data() + m.a.size());
  return j;
}

inline DynModel model_from_json(const nlohmann::json& j) {
  DynModel m;
  m.feature_version = j.at("feature_version").get<int>();
  if (m.feature_version != sysid::kFeatureVersion) {
    throw std::runtime_error("model file: unrecognized feature ordering version " +
                             std::to_string(m.feature_version));
  }
  m.dt = j.at("dt").get<double>();
  m.cfg = config_from_json(j.at("config"));
  const auto& a_rows = j.at("A");
  const auto& b_rows = j.at("B");
  if (a_rows.size() != kStateDim || b_rows.size() != kStateDim) {
    throw std::runtime_error("model file: wrong A/B row count");
  }
  for (int r = 0; r < kStateDim; ++r) {
    if (a_rows[r].size() != kAugDim || b_rows[r].size() != kControlDim) {
      throw std::runtime_error("model file: wrong A/B column count");
    }
    for (int c = 0; c < kAugDim; ++c) m.A(r, c) = a_rows[r][c].get<double>();
    for (int c = 0; c < kControlDim; ++c) m.B(r, c) = b_rows[r][c].get<double>();
  }
  const auto& a = j.at("a");
  const int na = sysid::num_quadratic_features(kAugDim + kControlDim);
  if (static_cast<int>(a.size()) != na) {
    throw std::runtime_error("model file: quadratic coefficient count must be " +
                             std::to_string(na));
  }
  m.a.resize(na);
  for (int i = 0; i < na; ++i) m.a(i) = a[i].get<double>();
  return m;
}

inline void write_model(const std::filesystem::path& path, const DynModel& m,
                        const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j = model_to_json(m);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  atomic_write(path, j.dump(2) + "\n");
}

inline DynModel read_model(const std::filesystem::path& path) {
  return model_from_json(nlohmann::json::parse(read_file(path)));
}

/// Controls-only CSV (t plus the three command channels).
inline constexpr const char* kControlsHeader = "t,ux,uy,uz";

inline std::string controls_to_csv(const std::vector<Control>& u, double dt) {
  std::string out = kControlsHeader;
  out += '\n';
  for (size_t k = 0; k < u.size(); ++k) {
    out += format_double(static_cast<double>(k) * dt);
    for (int i = 0; i < kControlDim; ++i) {
      out += ',';
      out += format_double(u[k](i));
    }
    out += '\n';
  }
  return out;
}

/// Reads either a controls-only CSV or a full flight log (command columns).
inline std::pair<std::vector<Control>, double> read_controls(
    const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw std::runtime_error(path.string() + ": empty file");
  if (lines[0] == kFlightLogHeader) {
    const FlightLog log = flight_log_from_csv(text, path.filename().string());
    return {log.controls, log.dt};
  }
  if (lines[0] != kControlsHeader) {
    throw std::runtime_error(path.string() + ": expected CSV header '" +
                             std::string(kControlsHeader) + "' or '" +
                             kFlightLogHeader + "'");
  }
  std::vector<Control> u;
  std::vector<double> times;
  for (size_t li = 1; li < lines.size(); ++li) {
    const auto fields = detail::split_csv_line(lines[li]);
    if (fields.size() != 4) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(li) +
                               " has " + std::to_string(fields.size()) +
                               " columns, expected 4");
    }
    const std::string ctx = path.string() + ": row " + std::to_string(li);
    times.push_back(detail::parse_double(fields[0], ctx));
    u.emplace_back(detail::parse_double(fields[1], ctx),
                   detail::parse_double(fields[2], ctx),
                   detail::parse_double(fields[3], ctx));
  }
  if (u.empty()) throw std::runtime_error(path.string() + ": no data rows");
  const double dt = times.size() >= 2 ? times[1] - times[0] : kDt;
  return {u, dt};
}

}  // namespace vinetraj::io
