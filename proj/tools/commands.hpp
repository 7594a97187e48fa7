#pragma once

// Command implementations behind the msegpd executable. Each command reads
// its settings from a Config, writes delimited text or JSON plus a metadata
// sidecar, and returns the process exit code.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msegpd/estimation.hpp"
#include "msegpd/idf.hpp"
#include "msegpd/ingestion.hpp"
#include "msegpd/multiscale_model.hpp"
#include "msegpd/parallel.hpp"
#include "msegpd/simulation.hpp"

namespace msegpd::cli {

inline constexpr const char* kToolVersion = "msegpd 0.1.0";

enum ExitCode : int { kSuccess = 0, kComputationFailure = 1, kUsageError = 2 };

// Bad flags, bad config values, or missing inputs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

[[nodiscard]] inline std::vector<int> standard_durations() {
  const auto grid = DurationGrid::standard();
  return {grid.durations().begin(), grid.durations().end()};
}

struct DataConfig {
  std::string input;
  FormatOptions format;
  std::set<unsigned> months;  // empty: all months
};

struct ModelConfig {
  std::vector<int> durations = standard_durations();
  std::size_t p = 3;
  std::size_t q = 3;
  double h = kDefaultLatticeStep;
};

struct FitConfig {
  std::size_t max_iters = 4000;
  double tol = 1e-6;
  double penalty_weight = 1e3;
  std::size_t restarts = 1;
  std::uint64_t seed = 1;
  std::string output = "fit.json";
};

struct BootstrapConfig {
  std::size_t replicates = 500;
  double block_days = 14.0;
  std::uint64_t seed = 1;
  std::string output = "bootstrap.csv";
};

struct IdfConfig {
  std::string fit = "fit.json";
  std::string bootstrap;
  // "observed": wet windows per month recorded in the fit file (model rate
  // for durations the fit did not see); "model": always the model rate.
  std::string rates = "observed";
  bool bands = false;
  double level = 0.95;
  std::vector<int> durations = standard_durations();
  std::vector<double> periods{0.5, 1.0, 12.0, 120.0};
  double coverage = kIdfCoverage;
  std::string output = "idf.csv";
  std::vector<int> qq_durations{5, 240};
  std::string qq_output = "qq.csv";
};

struct SimulateConfig {
  double sigma = 1.0;
  double kappa = 0.3;
  double xi = 0.25;
  double lambda = 0.01;
  std::size_t months = 36;
  std::uint64_t seed = 1;
  std::string start = "2001-01-01";
  std::int64_t step_seconds = 360;
  std::string quantization = "event_ceiling";
  std::string output = "simulated.csv";
  std::size_t recovery_replicates = 0;
  std::string recovery_output = "recovery.json";
};

struct Config {
  DataConfig data;
  ModelConfig model;
  FitConfig fit;
  BootstrapConfig bootstrap;
  IdfConfig idf;
  SimulateConfig simulate;
  std::size_t workers = default_workers();
};

namespace detail {

inline std::string trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

template <class T>
T parse_number(std::string_view text, const std::string& key) {
  const std::string s = trimmed(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw UsageError("invalid value '" + s + "' for " + key);
  }
  return value;
}

template <class T>
std::vector<T> parse_list(std::string_view text, const std::string& key) {
  std::vector<T> out;
  std::size_t pos = 0;
  const std::string s(text);
  while (pos <= s.size()) {
    const auto next = s.find(',', pos);
    const auto item = trimmed(std::string_view(s).substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (!item.empty()) out.push_back(parse_number<T>(item, key));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (out.empty()) throw UsageError("empty list for " + key);
  return out;
}

inline std::vector<int> parse_durations(std::string_view text, const std::string& key) {
  if (trimmed(text) == "standard") return standard_durations();
  return parse_list<int>(text, key);
}

inline std::set<unsigned> parse_months(std::string_view text) {
  const auto t = trimmed(text);
  if (t.empty() || t == "all") return {};
  std::set<unsigned> out;
  for (unsigned m : parse_list<unsigned>(t, "data.months")) {
    if (m < 1 || m > 12) throw UsageError("data.months: month " + std::to_string(m) + " outside 1..12");
    out.insert(m);
  }
  return out;
}

inline bool parse_bool(std::string_view text, const std::string& key) {
  const auto t = trimmed(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw UsageError("invalid boolean '" + t + "' for " + key);
}

template <class Seq>
std::string join(const Seq& seq) {
  std::string out;
  for (const auto& v : seq) {
    if (!out.empty()) out += ',';
    out += format_amount(static_cast<double>(v), -1);
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace detail

// FNV-1a, 64 bit.
[[nodiscard]] inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[nodiscard]] inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

[[nodiscard]] inline Config config_from_ptree(const boost::property_tree::ptree& pt) {
  using detail::parse_number;
  Config c;
  auto str = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = pt.get_optional<std::string>(key)) return detail::trimmed(*v);
    return std::nullopt;
  };
  const std::set<std::string> known_sections{"data", "model", "fit", "bootstrap", "idf", "simulate"};
  for (const auto& [section, body] : pt) {
    if (body.empty()) {
      if (section != "workers") throw UsageError("unknown top-level key '" + section + "'");
      continue;
    }
    if (!known_sections.contains(section)) throw UsageError("unknown config section [" + section + "]");
  }
  if (auto v = str("workers")) c.workers = parse_number<std::size_t>(*v, "workers");

  if (auto v = str("data.input")) c.data.input = *v;
  if (auto v = str("data.delimiter")) {
    if (*v == "tab" || *v == "\\t") {
      c.data.format.delimiter = '\t';
    } else if (v->size() == 1) {
      c.data.format.delimiter = (*v)[0];
    } else {
      throw UsageError("data.delimiter must be one character or 'tab'");
    }
  }
  if (auto v = str("data.timestamp_column")) c.data.format.timestamp_column = *v;
  if (auto v = str("data.value_column")) c.data.format.value_column = *v;
  if (auto v = str("data.missing")) c.data.format.missing_sentinel = *v;
  if (auto v = str("data.gauge_step")) c.data.format.gauge_step = parse_number<double>(*v, "data.gauge_step");
  if (auto v = str("data.step_seconds")) c.data.format.step_seconds = parse_number<std::int64_t>(*v, "data.step_seconds");
  if (auto v = str("data.fill_gaps")) c.data.format.fill_gaps = detail::parse_bool(*v, "data.fill_gaps");
  if (auto v = str("data.filter_column")) c.data.format.filter_column = *v;
  if (auto v = str("data.filter_value")) c.data.format.filter_value = *v;
  if (auto v = str("data.months")) c.data.months = detail::parse_months(*v);

  if (auto v = str("model.durations")) c.model.durations = detail::parse_durations(*v, "model.durations");
  if (auto v = str("model.p")) c.model.p = parse_number<std::size_t>(*v, "model.p");
  if (auto v = str("model.q")) c.model.q = parse_number<std::size_t>(*v, "model.q");
  if (auto v = str("model.h")) c.model.h = parse_number<double>(*v, "model.h");

  if (auto v = str("fit.max_iters")) c.fit.max_iters = parse_number<std::size_t>(*v, "fit.max_iters");
  if (auto v = str("fit.tol")) c.fit.tol = parse_number<double>(*v, "fit.tol");
  if (auto v = str("fit.penalty_weight")) c.fit.penalty_weight = parse_number<double>(*v, "fit.penalty_weight");
  if (auto v = str("fit.restarts")) c.fit.restarts = parse_number<std::size_t>(*v, "fit.restarts");
  if (auto v = str("fit.seed")) c.fit.seed = parse_number<std::uint64_t>(*v, "fit.seed");
  if (auto v = str("fit.output")) c.fit.output = *v;

  if (auto v = str("bootstrap.replicates")) c.bootstrap.replicates = parse_number<std::size_t>(*v, "bootstrap.replicates");
  if (auto v = str("bootstrap.block_days")) c.bootstrap.block_days = parse_number<double>(*v, "bootstrap.block_days");
  if (auto v = str("bootstrap.seed")) c.bootstrap.seed = parse_number<std::uint64_t>(*v, "bootstrap.seed");
  if (auto v = str("bootstrap.output")) c.bootstrap.output = *v;

  if (auto v = str("idf.fit")) c.idf.fit = *v;
  if (auto v = str("idf.bootstrap")) c.idf.bootstrap = *v;
  if (auto v = str("idf.rates")) c.idf.rates = *v;
  if (auto v = str("idf.bands")) c.idf.bands = detail::parse_bool(*v, "idf.bands");
  if (auto v = str("idf.level")) c.idf.level = parse_number<double>(*v, "idf.level");
  if (auto v = str("idf.durations")) c.idf.durations = detail::parse_durations(*v, "idf.durations");
  if (auto v = str("idf.periods")) c.idf.periods = detail::parse_list<double>(*v, "idf.periods");
  if (auto v = str("idf.coverage")) c.idf.coverage = parse_number<double>(*v, "idf.coverage");
  if (auto v = str("idf.output")) c.idf.output = *v;
  if (auto v = str("idf.qq_durations")) c.idf.qq_durations = detail::parse_durations(*v, "idf.qq_durations");
  if (auto v = str("idf.qq_output")) c.idf.qq_output = *v;

  if (auto v = str("simulate.sigma")) c.simulate.sigma = parse_number<double>(*v, "simulate.sigma");
  if (auto v = str("simulate.kappa")) c.simulate.kappa = parse_number<double>(*v, "simulate.kappa");
  if (auto v = str("simulate.xi")) c.simulate.xi = parse_number<double>(*v, "simulate.xi");
  if (auto v = str("simulate.lambda")) c.simulate.lambda = parse_number<double>(*v, "simulate.lambda");
  if (auto v = str("simulate.months")) c.simulate.months = parse_number<std::size_t>(*v, "simulate.months");
  if (auto v = str("simulate.seed")) c.simulate.seed = parse_number<std::uint64_t>(*v, "simulate.seed");
  if (auto v = str("simulate.start")) c.simulate.start = *v;
  if (auto v = str("simulate.step_seconds")) c.simulate.step_seconds = parse_number<std::int64_t>(*v, "simulate.step_seconds");
  if (auto v = str("simulate.quantization")) c.simulate.quantization = *v;
  if (auto v = str("simulate.output")) c.simulate.output = *v;
  if (auto v = str("simulate.recovery_replicates")) {
    c.simulate.recovery_replicates = parse_number<std::size_t>(*v, "simulate.recovery_replicates");
  }
  if (auto v = str("simulate.recovery_output")) c.simulate.recovery_output = *v;
  return c;
}

[[nodiscard]] inline Config parse_config(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return config_from_ptree(pt);
}

[[nodiscard]] inline Config load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config(in);
}

// Effective settings in a fixed order. File paths and the worker count are
// left out: inputs are fingerprinted by content, and neither changes a value.
[[nodiscard]] inline std::string canonical_config(const Config& c) {
  std::ostringstream os;
  const auto& f = c.data.format;
  os << "[data]\ndelimiter=" << static_cast<int>(f.delimiter)
     << "\ntimestamp_column=" << f.timestamp_column << "\nvalue_column=" << f.value_column
     << "\nmissing=" << f.missing_sentinel << "\ngauge_step=" << format_amount(f.gauge_step, -1)
     << "\nstep_seconds=" << f.step_seconds << "\nfill_gaps=" << f.fill_gaps << "\nfilter_column=" << f.filter_column
     << "\nfilter_value=" << f.filter_value << "\nmonths=" << detail::join(c.data.months) << '\n';
  os << "[model]\ndurations=" << detail::join(c.model.durations) << "\np=" << c.model.p << "\nq=" << c.model.q
     << "\nh=" << format_amount(c.model.h, -1) << '\n';
  os << "[fit]\nmax_iters=" << c.fit.max_iters << "\ntol=" << format_amount(c.fit.tol, -1)
     << "\npenalty_weight=" << format_amount(c.fit.penalty_weight, -1) << "\nrestarts=" << c.fit.restarts
     << "\nseed=" << c.fit.seed << '\n';
  os << "[bootstrap]\nreplicates=" << c.bootstrap.replicates << "\nblock_days=" << format_amount(c.bootstrap.block_days, -1)
     << "\nseed=" << c.bootstrap.seed << '\n';
  os << "[idf]\nrates=" << c.idf.rates << "\nbands=" << c.idf.bands << "\nlevel=" << format_amount(c.idf.level, -1)
     << "\ndurations=" << detail::join(c.idf.durations) << "\nperiods=" << detail::join(c.idf.periods)
     << "\ncoverage=" << format_amount(c.idf.coverage, -1) << "\nqq_durations=" << detail::join(c.idf.qq_durations)
     << '\n';
  const auto& s = c.simulate;
  os << "[simulate]\nsigma=" << format_amount(s.sigma, -1) << "\nkappa=" << format_amount(s.kappa, -1)
     << "\nxi=" << format_amount(s.xi, -1) << "\nlambda=" << format_amount(s.lambda, -1) << "\nmonths=" << s.months
     << "\nseed=" << s.seed << "\nstart=" << s.start << "\nstep_seconds=" << s.step_seconds
     << "\nquantization=" << s.quantization << "\nrecovery_replicates=" << s.recovery_replicates << '\n';
  return os.str();
}

[[nodiscard]] inline std::string config_hash(const Config& c) { return detail::hex64(fnv1a64(canonical_config(c))); }

// ---------------------------------------------------------------------------
// Shared plumbing

using Json = nlohmann::ordered_json;

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path not set");
  if (!std::filesystem::is_regular_file(path)) throw IoError(std::string(what) + " file not found: " + path);
}

inline std::ofstream open_output(const std::string& path) {
  if (path.empty()) throw UsageError("output path not set");
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("output directory does not exist: " + parent.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline Json read_json(const std::string& path, const char* what) {
  require_file(path, what);
  std::ifstream in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string(what) + " " + path + " is not valid JSON: " + e.what());
  }
}

inline std::string num(double v) { return format_amount(v, -1); }

inline Json theta_json(const MultiscaleTheta& t) {
  Json j;
  j["sigma_coefficients"] = std::vector<double>(t.s().begin(), t.s().end());
  j["kappa"] = t.kappa();
  j["xi"] = t.xi();
  j["lambda_coefficients"] = std::vector<double>(t.l().begin(), t.l().end());
  return j;
}

inline MultiscaleTheta theta_from_json(const Json& j) {
  return MultiscaleTheta(j.at("sigma_coefficients").get<std::vector<double>>(), j.at("kappa").get<double>(),
                         j.at("xi").get<double>(), j.at("lambda_coefficients").get<std::vector<double>>());
}

inline Json provenance(const Config& c, const std::string& command, std::optional<std::uint64_t> seed) {
  Json j;
  j["tool"] = kToolVersion;
  j["command"] = command;
  j["config_hash"] = config_hash(c);
  if (seed) j["seed"] = *seed;
  return j;
}

inline Json input_provenance(const std::string& path) {
  Json j;
  j["path"] = path;
  j["fnv1a64"] = hex64(file_hash(path));
  return j;
}

inline void write_sidecar(const std::string& output, Json meta) { write_json(output + ".meta.json", meta); }

inline TimeSeries load_series(const Config& c) {
  require_file(c.data.input, "input");
  auto series = parse_series(c.data.input, c.data.format);
  if (!c.data.months.empty()) series = season_filter(series, c.data.months);
  return series;
}

inline DurationGrid model_grid(const Config& c, const TimeSeries& series) {
  try {
    return DurationGrid(c.model.durations, series.step_minutes());
  } catch (const DomainError& e) {
    throw UsageError(std::string("model.durations: ") + e.what());
  }
}

inline FitOptions fit_options(const Config& c) {
  FitOptions o;
  o.p = c.model.p;
  o.q = c.model.q;
  o.h = c.model.h;
  o.max_iters = c.fit.max_iters;
  o.tol = c.fit.tol;
  o.penalty_weight = c.fit.penalty_weight;
  o.restarts = c.fit.restarts;
  o.seed = c.fit.seed;
  try {
    o.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return o;
}

struct FitFile {
  MultiscaleTheta theta;
  std::map<int, double> wet_per_month;
  double base_step_minutes = 6.0;
};

inline FitFile read_fit_file(const std::string& path) {
  const Json j = read_json(path, "fit");
  try {
    FitFile f{.theta = theta_from_json(j.at("theta"))};
    f.base_step_minutes = j.at("base_step_minutes").get<double>();
    for (const auto& d : j.at("durations")) {
      f.wet_per_month[d.at("d").get<int>()] = d.at("wet_windows_per_month").get<double>();
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("fit file " + path + " is malformed: " + e.what());
  } catch (const DomainError& e) {
    throw UsageError("fit file " + path + " holds invalid parameters: " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bootstrap replicate files

inline void write_replicates(std::ostream& out, const BootstrapResult& result) {
  if (result.replicates.empty()) return;
  const auto& t0 = result.replicates.front().theta;
  out << "replicate,converged,monotone,objective,kappa,xi";
  for (std::size_t i = 0; i <= t0.p(); ++i) out << ",s" << i;
  for (std::size_t j = 0; j <= t0.q(); ++j) out << ",l" << j;
  out << '\n';
  for (std::size_t b = 0; b < result.replicates.size(); ++b) {
    const auto& r = result.replicates[b];
    out << b << ',' << (r.converged ? 1 : 0) << ',' << (r.monotone ? 1 : 0) << ',' << detail::num(r.objective) << ','
        << detail::num(r.theta.kappa()) << ',' << detail::num(r.theta.xi());
    for (double v : r.theta.s()) out << ',' << detail::num(v);
    for (double v : r.theta.l()) out << ',' << detail::num(v);
    out << '\n';
  }
}

[[nodiscard]] inline BootstrapResult read_replicates(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("bootstrap file is empty");
  std::size_t p1 = 0, q1 = 0;
  {
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto next = line.find(',', pos);
      const auto col = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (!col.empty() && col[0] == 's') ++p1;
      if (!col.empty() && col[0] == 'l') ++q1;
      if (next == std::string::npos) break;
      pos = next + 1;
    }
  }
  if (p1 == 0 || q1 == 0) throw UsageError("bootstrap file header lacks coefficient columns");
  BootstrapResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (;;) {
      auto next = line.find(',', pos);
      f.push_back(line.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (f.size() != 6 + p1 + q1) throw UsageError("bootstrap file line " + std::to_string(line_no) + ": wrong field count");
    const std::string where = "bootstrap file line " + std::to_string(line_no);
    auto value = [&](std::size_t k) {
      if (f[k] == "-inf") return -std::numeric_limits<double>::infinity();
      return detail::parse_number<double>(f[k], where);
    };
    std::vector<double> s, l;
    for (std::size_t i = 0; i < p1; ++i) s.push_back(value(6 + i));
    for (std::size_t j = 0; j < q1; ++j) l.push_back(value(6 + p1 + j));
    BootstrapReplicate r{MultiscaleTheta(std::move(s), value(4), value(5), std::move(l)), value(3), f[1] == "1",
                         f[2] == "1"};
    result.replicates.push_back(std::move(r));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_fit(const Config& c, std::ostream& log = std::cerr) {
  const auto series = detail::load_series(c);
  const auto grid = detail::model_grid(c, series);
  const auto opts = detail::fit_options(c);
  const auto data = build_dataset(series, grid);
  const auto fit = fit_mcle(data, grid, opts);

  Json j;
  j["format"] = "msegpd-fit/1";
  j["provenance"] = detail::provenance(c, "fit", c.fit.seed);
  j["provenance"]["input"] = detail::input_provenance(c.data.input);
  j["base_step_minutes"] = series.step_minutes();
  j["months_of_record"] = series.months_of_record();
  j["theta"] = detail::theta_json(fit.theta_hat);
  j["composite_loglik"] = fit.objective;
  j["converged"] = fit.converged;
  j["monotone"] = fit.monotone;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["penalty_weight"] = fit.penalty_weight;
  Json rows = Json::array();
  for (const auto& s : data) {
    Json r;
    r["d"] = s.d;
    r["sigma"] = sigma_at(fit.theta_hat, s.d);
    r["lambda"] = lambda_at(fit.theta_hat, s.d);
    r["n_positive"] = s.values.size();
    r["windows_per_month"] = s.n_obs_per_month;
    r["wet_windows_per_month"] = s.n_positive_per_month;
    double mean_loglik = 0.0;
    for (const auto& dd : fit.per_duration_diag)
      if (dd.d == s.d) mean_loglik = dd.mean_loglik;
    r["mean_loglik"] = s.values.empty() ? Json(nullptr) : Json(mean_loglik);
    rows.push_back(std::move(r));
  }
  j["durations"] = std::move(rows);
  j["warnings"] = fit.warnings;
  detail::write_json(c.fit.output, j);

  for (const auto& w : fit.warnings) log << "warning: " << w << '\n';
  if (!fit.monotone) {
    log << "error: fitted sigma_d / lambda_d are not monotone on the grid\n";
    return kComputationFailure;
  }
  if (!fit.converged) {
    log << "error: optimizer did not converge\n";
    return kComputationFailure;
  }
  return kSuccess;
}

inline int cmd_bootstrap(const Config& c, std::ostream& log = std::cerr) {
  if (c.bootstrap.replicates < 1) throw UsageError("bootstrap.replicates must be >= 1");
  const auto series = detail::load_series(c);
  const auto grid = detail::model_grid(c, series);
  auto opts = detail::fit_options(c);
  const auto data = build_dataset(series, grid);
  // Replicates start from the full-sample estimate.
  const auto full = fit_mcle(data, grid, opts);
  opts.init = full.theta_hat;
  const auto result =
      block_bootstrap(series, grid, opts, c.bootstrap.replicates, c.bootstrap.block_days, c.bootstrap.seed, c.workers);

  std::ostringstream body;
  write_replicates(body, result);
  detail::write_text(c.bootstrap.output, body.str());

  std::size_t usable = 0;
  for (const auto& r : result.replicates) usable += (r.converged && r.monotone) ? 1 : 0;
  Json meta;
  meta["format"] = "msegpd-bootstrap/1";
  meta["provenance"] = detail::provenance(c, "bootstrap", c.bootstrap.seed);
  meta["provenance"]["input"] = detail::input_provenance(c.data.input);
  meta["replicates"] = result.replicates.size();
  meta["usable_replicates"] = usable;
  meta["block_days"] = c.bootstrap.block_days;
  meta["full_sample_theta"] = detail::theta_json(full.theta_hat);
  detail::write_sidecar(c.bootstrap.output, meta);
  if (usable < result.replicates.size()) {
    log << "warning: " << result.replicates.size() - usable << " replicate(s) not converged or not monotone\n";
  }
  return kSuccess;
}

inline int cmd_idf(const Config& c, std::ostream& log = std::cerr) {
  if (c.idf.bands && c.idf.bootstrap.empty()) throw UsageError("idf bands requested without a bootstrap file");
  const auto fit = detail::read_fit_file(c.idf.fit);
  IdfQuery query;
  query.durations = c.idf.durations;
  query.return_periods = c.idf.periods;
  query.base_step_minutes = fit.base_step_minutes;
  if (c.idf.rates != "observed" && c.idf.rates != "model") throw UsageError("idf.rates must be observed or model");
  for (int d : query.durations) {
    if (c.idf.rates == "model") break;
    const auto it = fit.wet_per_month.find(d);
    if (it != fit.wet_per_month.end() && it->second > 0.0) query.n_obs_per_month[d] = it->second;
  }
  IdfTable table;
  try {
    table = idf_table(fit.theta, query, c.model.h, c.idf.coverage);
  } catch (const PreconditionError& e) {
    log << "error: refusing to build IDF table: " << e.what() << '\n';
    return kComputationFailure;
  }

  std::optional<std::vector<Interval>> bands;
  std::size_t used = 0;
  if (c.idf.bands) {
    detail::require_file(c.idf.bootstrap, "bootstrap");
    std::ifstream in(c.idf.bootstrap);
    const auto result = read_replicates(in);
    bands = band(
        result,
        [&](const MultiscaleTheta& t) {
          const auto tab = idf_table(t, query, c.model.h, c.idf.coverage);
          std::vector<double> cells;
          for (const auto& row : tab.levels) cells.insert(cells.end(), row.begin(), row.end());
          return cells;
        },
        c.idf.level);
    used = bands->empty() ? 0 : bands->front().replicates_used;
  }

  const int decimals = gauge_decimals(c.model.h);
  std::ostringstream os;
  os << "duration_minutes,return_period_months,wet_windows_per_month,level_mm";
  if (bands) os << ",lower_mm,upper_mm";
  os << '\n';
  std::size_t cell = 0;
  for (std::size_t i = 0; i < table.durations.size(); ++i) {
    const double minutes = table.durations[i] * fit.base_step_minutes;
    for (std::size_t k = 0; k < table.return_periods.size(); ++k, ++cell) {
      os << detail::num(minutes) << ',' << detail::num(table.return_periods[k]) << ',' << detail::num(table.rates[i])
         << ',' << format_amount(table.levels[i][k], decimals);
      if (bands) {
        os << ',' << format_amount((*bands)[cell].lower, decimals) << ','
           << format_amount((*bands)[cell].upper, decimals);
      }
      os << '\n';
    }
  }
  detail::write_text(c.idf.output, os.str());

  // Calendar columns can dip where lambda_d grows slower than d; the
  // guaranteed property is non-crossing at a common order, audited with the
  // largest wet rate of the table shared by all columns.
  const auto calendar = audit_table(table);
  const double n_ref = table.rates.empty() ? 0.0 : *std::max_element(table.rates.begin(), table.rates.end());
  std::vector<double> counts;
  for (double t : table.return_periods) counts.push_back(n_ref * t);
  const auto common = non_crossing_audit(fit.theta, table.durations, counts, c.model.h, c.idf.coverage);

  Json meta;
  meta["format"] = "msegpd-idf/1";
  meta["provenance"] = detail::provenance(c, "idf", std::nullopt);
  meta["provenance"]["fit"] = detail::input_provenance(c.idf.fit);
  if (bands) {
    meta["provenance"]["bootstrap"] = detail::input_provenance(c.idf.bootstrap);
    meta["band_level"] = c.idf.level;
    meta["band_replicates"] = used;
  }
  meta["theta"] = detail::theta_json(fit.theta);
  meta["rates"] = c.idf.rates;
  meta["non_crossing_calendar"] = calendar.passed;
  meta["non_crossing_common_order"] = common.passed;
  detail::write_sidecar(c.idf.output, meta);
  if (!calendar.passed) {
    log << "warning: calendar return levels decrease between d=" << *calendar.worst_d << " and d="
        << *calendar.worst_d_next << " at T=" << detail::num(*calendar.worst_period) << " months\n";
  }
  if (!common.passed) {
    log << "error: quantiles at a common order decrease between d=" << *common.worst_d << " and d="
        << *common.worst_d_next << '\n';
    return kComputationFailure;
  }
  return kSuccess;
}

inline int cmd_qq(const Config& c, std::ostream& log = std::cerr) {
  const auto fit = detail::read_fit_file(c.idf.fit);
  const auto series = detail::load_series(c);
  auto durations = c.idf.qq_durations;
  std::sort(durations.begin(), durations.end());
  durations.erase(std::unique(durations.begin(), durations.end()), durations.end());
  std::ostringstream os;
  os << "duration_steps,probability,model_mm,empirical_mm\n";
  Json skipped = Json::array();
  for (int d : durations) {
    if (d < 1) throw UsageError("qq durations must be >= 1");
    const auto sample = aggregate(series, d);
    if (sample.values.empty()) {
      log << "warning: no positive amounts at d=" << d << "; skipped\n";
      skipped.push_back(d);
      continue;
    }
    for (const auto& pt : qq_points(fit.theta, sample, c.model.h, c.idf.coverage)) {
      os << d << ',' << detail::num(pt.probability) << ',' << detail::num(pt.model) << ',' << detail::num(pt.empirical)
         << '\n';
    }
  }
  detail::write_text(c.idf.qq_output, os.str());
  Json meta;
  meta["format"] = "msegpd-qq/1";
  meta["provenance"] = detail::provenance(c, "qq", std::nullopt);
  meta["provenance"]["input"] = detail::input_provenance(c.data.input);
  meta["provenance"]["fit"] = detail::input_provenance(c.idf.fit);
  meta["plotting_positions"] = "hazen";
  meta["skipped_durations"] = std::move(skipped);
  detail::write_sidecar(c.idf.qq_output, meta);
  return kSuccess;
}

[[nodiscard]] inline Quantization parse_quantization(const std::string& s) {
  if (s == "event_ceiling") return Quantization::EventCeiling;
  if (s == "nearest_total") return Quantization::NearestTotal;
  if (s == "off") return Quantization::Off;
  throw UsageError("simulate.quantization must be event_ceiling, nearest_total or off");
}

inline Json recovery_json(const RecoveryReport& rep) {
  auto quant = [](const SummaryQuantiles& q) {
    Json j;
    j["truth"] = q.truth;
    j["median"] = q.median;
    j["lower_2.5"] = q.lower;
    j["upper_97.5"] = q.upper;
    return j;
  };
  Json j;
  j["months"] = rep.months;
  j["replicates"] = rep.replicates.size();
  j["failures"] = rep.failures;
  j["kappa"] = quant(rep.kappa);
  j["xi"] = quant(rep.xi);
  Json rows = Json::array();
  for (const auto& d : rep.durations) {
    Json r;
    r["d"] = d.d;
    r["sigma"] = quant(d.sigma);
    r["lambda"] = quant(d.lambda);
    rows.push_back(std::move(r));
  }
  j["durations"] = std::move(rows);
  Json reps = Json::array();
  for (const auto& r : rep.replicates) {
    Json e = detail::theta_json(r.theta_hat);
    e["converged"] = r.converged;
    e["monotone"] = r.monotone;
    e["positive_base_steps"] = r.positive_base_steps;
    reps.push_back(std::move(e));
  }
  j["fits"] = std::move(reps);
  return j;
}

inline int cmd_simulate(const Config& c, std::ostream& log = std::cerr) {
  (void)log;
  const auto& s = c.simulate;
  SimulationOptions so;
  const auto start = calendar::parse_timestamp(s.start);
  if (!start) throw UsageError("simulate.start: cannot parse '" + s.start + "'");
  if (calendar::date_of(*start).day != 1 || *start % 86400 != 0) {
    throw UsageError("simulate.start must be the first day of a month at 00:00");
  }
  if (s.step_seconds <= 0) throw UsageError("simulate.step_seconds must be > 0");
  so.start = *start;
  so.step_seconds = s.step_seconds;
  so.h = c.model.h;
  so.quantization = parse_quantization(s.quantization);
  std::optional<EgpdParams> truth;
  try {
    truth.emplace(s.sigma, s.kappa, s.xi);
  } catch (const DomainError& e) {
    throw UsageError(std::string("simulate: ") + e.what());
  }
  if (!(s.lambda >= 0.0)) throw UsageError("simulate.lambda must be >= 0");

  const auto n = steps_for_months(so.start, s.months, so.step_seconds);
  const auto series = simulate_base_series(*truth, s.lambda, n, s.seed, so);
  std::ostringstream body;
  write_series(body, series);
  detail::write_text(s.output, body.str());

  Json meta;
  meta["format"] = "msegpd-series/1";
  meta["provenance"] = detail::provenance(c, "simulate", s.seed);
  Json t;
  t["sigma"] = s.sigma;
  t["kappa"] = s.kappa;
  t["xi"] = s.xi;
  t["lambda"] = s.lambda;
  meta["truth"] = t;
  meta["months"] = s.months;
  meta["steps"] = n;
  meta["step_seconds"] = s.step_seconds;
  meta["quantization"] = s.quantization;
  detail::write_sidecar(s.output, meta);

  if (s.recovery_replicates > 0) {
    RecoveryOptions ro;
    ro.months = s.months;
    ro.replicates = s.recovery_replicates;
    ro.rng_seed = s.seed;
    ro.workers = c.workers;
    ro.fit = detail::fit_options(c);
    ro.simulation = so;
    const auto grid = DurationGrid(c.model.durations, static_cast<double>(s.step_seconds) / 60.0);
    const auto rep = recovery_study(*truth, s.lambda, grid, ro);
    Json j;
    j["format"] = "msegpd-recovery/1";
    j["provenance"] = detail::provenance(c, "simulate", s.seed);
    j["truth"] = t;
    j["report"] = recovery_json(rep);
    detail::write_json(s.recovery_output, j);
  }
  return kSuccess;
}

// Maps exceptions to exit codes; messages go to `log`.
template <class F>
int guarded(F&& command, std::ostream& log = std::cerr) {
  try {
    return command();
  } catch (const UsageError& e) {
    log << "error: " << e.what() << '\n';
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    log << "error: input: " << e.what() << '\n';
  } catch (const std::ios_base::failure& e) {
    log << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kComputationFailure;
  }
  return kUsageError;
}

}  // namespace msegpd::cli
