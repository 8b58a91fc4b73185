#include "vinetraj/io.hpp"
#include "vinetraj/svg.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

namespace vinetraj::io {
namespace {

namespace fs = std::filesystem;

uint64_t bits(double v) {
  uint64_t b = 0;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::path(testing::TempDir()) / name;
  fs::create_directories(dir);
  return dir;
}

FlightLog random_log(std::mt19937_64& rng, int rows) {
  std::normal_distribution<double> nd(0.0, 1.0);
  FlightLog log;
  log.dt = kDt;
  for (int k = 0; k < rows; ++k) {
    State x;
    for (int i = 0; i < kStateDim; ++i) x(i) = nd(rng);
    Control u;
    for (int i = 0; i < kControlDim; ++i) u(i) = nd(rng);
    log.states.push_back(x);
    log.controls.push_back(u);
  }
  return log;
}

TEST(FormatDouble, RoundTripsBitExact) {
  const double values[] = {0.0,       -0.0,   1.0 / 3.0, 0.1,    0.05,
                           2.0 / 3.0, 1e308,  5e-324,    1e-17,  -1e-300,
                           3.141592653589793, 123456789.123456789, -0.002};
  for (double v : values) {
    const std::string s = format_double(v);
    const double back = detail::parse_double(s, "round trip");
    EXPECT_EQ(bits(back), bits(v)) << s;
  }
  EXPECT_EQ(format_double(-0.0)[0], '-');
}

TEST(FlightLogCsv, RoundTripsBitExact) {
  std::mt19937_64 rng(21);
  const FlightLog log = random_log(rng, 25);
  const std::string text = flight_log_to_csv(log);
  const FlightLog back = flight_log_from_csv(text, "test");
  ASSERT_EQ(back.states.size(), log.states.size());
  ASSERT_EQ(back.controls.size(), log.controls.size());
  EXPECT_EQ(bits(back.dt), bits(log.dt));
  for (size_t k = 0; k < log.states.size(); ++k) {
    EXPECT_EQ((back.states[k] - log.states[k]).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((back.controls[k] - log.controls[k]).cwiseAbs().maxCoeff(), 0.0);
  }

  const fs::path dir = temp_dir("flightlog_roundtrip");
  write_flight_log(dir / "log.csv", log);
  const FlightLog from_file = read_flight_log(dir / "log.csv");
  EXPECT_EQ(flight_log_to_csv(from_file), text);
}

TEST(FlightLogCsv, ToleratesCarriageReturns) {
  std::mt19937_64 rng(22);
  const FlightLog log = random_log(rng, 5);
  std::string text = flight_log_to_csv(log);
  std::string crlf;
  for (char c : text) {
    if (c == '\n') crlf += '\r';
    crlf += c;
  }
  const FlightLog back = flight_log_from_csv(crlf, "crlf");
  ASSERT_EQ(back.states.size(), 5u);
  EXPECT_EQ((back.states[3] - log.states[3]).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FlightLogCsv, RejectsMalformedInput) {
  std::mt19937_64 rng(23);
  const FlightLog log = random_log(rng, 5);
  const std::string good = flight_log_to_csv(log);

  EXPECT_THROW(flight_log_from_csv("x,y,z\n1,2,3\n", "bad"), std::runtime_error);
  EXPECT_THROW(flight_log_from_csv(std::string(kFlightLogHeader) + "\n", "empty"),
               std::runtime_error);
  {
    std::string text = good;
    text.insert(text.find('\n', text.find('\n') + 1), ",0.5");  // 14 columns
    EXPECT_THROW(flight_log_from_csv(text, "wide"), std::runtime_error);
  }
  {
    std::string text = good;
    const size_t pos = text.find(',', text.find('\n') + 1);
    text.replace(text.find('\n') + 1, pos - text.find('\n') - 1, "abc");
    EXPECT_THROW(flight_log_from_csv(text, "field"), std::runtime_error);
  }
  {
    // jitter the third row's timestamp off the uniform grid
    FlightLog jig = log;
    std::string text = flight_log_to_csv(jig);
    size_t row = 0;
    size_t pos = 0;
    while (row < 3) {
      pos = text.find('\n', pos) + 1;
      ++row;
    }
    const size_t comma = text.find(',', pos);
    text.replace(pos, comma - pos, "0.123");
    EXPECT_THROW(flight_log_from_csv(text, "grid"), std::runtime_error);
  }
  {
    FlightLog bad = log;
    bad.controls.pop_back();
    EXPECT_THROW(flight_log_to_csv(bad), std::invalid_argument);
  }
}

TEST(AtomicWrite, CreatesDirectoriesAndLeavesNoTempFiles) {
  const fs::path dir = temp_dir("atomic_write");
  const fs::path target = dir / "nested" / "deeper" / "out.txt";
  atomic_write(target, "hello");
  EXPECT_EQ(read_file(target), "hello");
  fs::path tmp = target;
  tmp += ".tmp";
  EXPECT_FALSE(fs::exists(tmp));
  atomic_write(target, "replaced");
  EXPECT_EQ(read_file(target), "replaced");
}

TEST(ReadFile, MissingFilesThrowTheirOwnType) {
  const fs::path nowhere = temp_dir("read_file") / "does_not_exist.csv";
  EXPECT_THROW(read_file(nowhere), MissingFileError);
  // and MissingFileError stays catchable as a generic runtime error
  bool caught = false;
  try {
    read_file(nowhere);
  } catch (const std::runtime_error&) {
    caught = true;
  }
  EXPECT_TRUE(caught);
}

DynModel random_model(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  DynModel m;
  for (int r = 0; r < kStateDim; ++r) {
    for (int c = 0; c < kAugDim; ++c) m.A(r, c) = nd(rng);
    for (int c = 0; c < kControlDim; ++c) m.B(r, c) = nd(rng);
  }
  for (int i = 0; i < m.a.size(); ++i) m.a(i) = nd(rng);
  m.cfg = VineConfig{0.3, 0.9};
  return m;
}

TEST(ModelJson, RoundTripsBitExact) {
  std::mt19937_64 rng(24);
  const DynModel m = random_model(rng);
  const DynModel back = model_from_json(model_to_json(m));
  EXPECT_EQ((back.A - m.A).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((back.B - m.B).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((back.a - m.a).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(bits(back.cfg.pressure_kpa), bits(m.cfg.pressure_kpa));
  EXPECT_EQ(bits(back.cfg.length_m), bits(m.cfg.length_m));
  EXPECT_EQ(bits(back.dt), bits(m.dt));
  EXPECT_EQ(back.feature_version, m.feature_version);

  const fs::path dir = temp_dir("model_json");
  write_model(dir / "model.json", m, {{"source_logs", {"a.csv", "b.csv"}}});
  const DynModel from_file = read_model(dir / "model.json");
  EXPECT_EQ((from_file.A - m.A).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((from_file.a - m.a).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModelJson, RejectsBadFiles) {
  std::mt19937_64 rng(25);
  const DynModel m = random_model(rng);
  {
    nlohmann::json j = model_to_json(m);
    j["feature_version"] = 2;
    EXPECT_THROW(model_from_json(j), std::runtime_error);
  }
  {
    nlohmann::json j = model_to_json(m);
    j["a"].erase(j["a"].size() - 1);
    EXPECT_THROW(model_from_json(j), std::runtime_error);
  }
  {
    nlohmann::json j = model_to_json(m);
    j["A"].erase(0);
    EXPECT_THROW(model_from_json(j), std::runtime_error);
  }
  {
    nlohmann::json j = model_to_json(m);
    j["B"][2].erase(0);
    EXPECT_THROW(model_from_json(j), std::runtime_error);
  }
}

TEST(LogMeta, RoundTripsThroughTheSidecar) {
  const fs::path dir = temp_dir("log_meta");
  const fs::path csv = dir / "run.csv";
  EXPECT_EQ(meta_path_for(csv), dir / "run.meta.json");

  LogMeta meta;
  meta.dt = kDt;
  meta.seed = 424242;
  meta.cfg = VineConfig{0.4, 0.7};
  meta.schedule = {VineConfig{0.0, 0.7}, VineConfig{0.2, 0.85}, VineConfig{0.4, 1.0}};
  meta.params.noise_sigma = 0.002;
  meta.script = "pretzel";
  meta.label = "IS";
  write_log_meta(meta_path_for(csv), meta);

  const LogMeta back = read_log_meta(meta_path_for(csv));
  EXPECT_EQ(bits(back.dt), bits(meta.dt));
  EXPECT_EQ(back.seed, meta.seed);
  EXPECT_EQ(bits(back.cfg.pressure_kpa), bits(meta.cfg.pressure_kpa));
  ASSERT_EQ(back.schedule.size(), 3u);
  EXPECT_EQ(bits(back.schedule[1].length_m), bits(0.85));
  EXPECT_EQ(bits(back.params.noise_sigma), bits(0.002));
  EXPECT_EQ(back.params.omega_n, meta.params.omega_n);
  EXPECT_EQ(back.script, "pretzel");
  EXPECT_EQ(back.label, "IS");
}

TEST(FitReportJson, CarriesTheValidationNumbers) {
  sysid::FitReport rep;
  rep.one_step_rmse.setLinSpaced(kStateDim, 0.1, 0.9);
  rep.ee_rmse = 0.017;
  rep.divergence_horizon = 123;
  rep.condition_number = 4.5e6;
  const nlohmann::json j = fit_report_to_json(rep);
  EXPECT_EQ(j.at("ee_rmse_m").get<double>(), 0.017);
  EXPECT_EQ(j.at("divergence_horizon_steps").get<int>(), 123);
  EXPECT_EQ(j.at("condition_number").get<double>(), 4.5e6);
  EXPECT_EQ(j.at("one_step_rmse").size(), static_cast<size_t>(kStateDim));
}

TEST(ControlsCsv, RoundTripsAndReadsBothFormats) {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Control> u;
  for (int k = 0; k < 7; ++k) u.emplace_back(nd(rng), nd(rng), nd(rng));

  const fs::path dir = temp_dir("controls_csv");
  atomic_write(dir / "u.csv", controls_to_csv(u, kDt));
  const auto [back, dt] = read_controls(dir / "u.csv");
  ASSERT_EQ(back.size(), u.size());
  EXPECT_EQ(bits(dt), bits(kDt));
  for (size_t k = 0; k < u.size(); ++k) {
    EXPECT_EQ((back[k] - u[k]).cwiseAbs().maxCoeff(), 0.0);
  }

  // a full flight log is accepted too; its command columns come back
  FlightLog log = random_log(rng, 6);
  write_flight_log(dir / "log.csv", log);
  const auto [from_log, log_dt] = read_controls(dir / "log.csv");
  ASSERT_EQ(from_log.size(), 6u);
  EXPECT_EQ((from_log[2] - log.controls[2]).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(bits(log_dt), bits(log.dt));

  atomic_write(dir / "bad.csv", "a,b\n1,2\n");
  EXPECT_THROW(read_controls(dir / "bad.csv"), std::runtime_error);
  EXPECT_THROW(read_controls(dir / "missing.csv"), MissingFileError);
}

TEST(Svg, EmitsAWellFormedLinePlot) {
  svg::Series s1;
  svg::Series s2;
  for (int k = 0; k < 50; ++k) {
    const double t = 0.1 * k;
    s1.x.push_back(t);
    s1.y.push_back(std::sin(t));
    s2.x.push_back(t);
    s2.y.push_back(std::cos(t));
  }
  s1.label = "measured";
  s2.label = "reference";
  s2.dash = "4 3";
  const std::string text = svg::line_plot("tracking", "time [s]", "x [m]", {s1, s2});
  EXPECT_NE(text.find("<svg"), std::string::npos);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
  size_t polylines = 0;
  for (size_t pos = 0; (pos = text.find("<polyline", pos)) != std::string::npos; ++pos) {
    ++polylines;
  }
  EXPECT_GE(polylines, 2u);
  EXPECT_NE(text.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(text.find("tracking"), std::string::npos);

  const fs::path dir = temp_dir("svg_plot");
  svg::write_line_plot(dir / "plot.svg", "t", "x", "y", {s1});
  EXPECT_EQ(read_file(dir / "plot.svg").substr(0, 4), "<svg");
}

}  // namespace
}  // namespace vinetraj::io
