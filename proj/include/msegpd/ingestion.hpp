#pragma once

// Fixed-step rain gauge series: parsing, season selection and aggregation
// into per-duration positive samples.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msegpd/calendar.hpp"
#include "msegpd/compound.hpp"
#include "msegpd/errors.hpp"
#include "msegpd/multiscale_model.hpp"

namespace msegpd {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[nodiscard]] inline bool is_missing(double v) noexcept { return std::isnan(v); }

// A run of consecutive base steps. Aggregation windows never cross segments.
struct Segment {
  std::int64_t start = 0;  // seconds since epoch of the first step
  std::size_t offset = 0;  // index of the first step in TimeSeries::values()
  std::size_t length = 0;
};

class TimeSeries {
 public:
  // gauge_step is the recording precision h (0 for unquantized amounts).
  TimeSeries(std::int64_t step_seconds, double gauge_step, std::vector<double> values, std::vector<Segment> segments)
      : step_seconds_(step_seconds), gauge_step_(gauge_step), values_(std::move(values)), segments_(std::move(segments)) {
    if (step_seconds_ <= 0) throw DomainError("TimeSeries: step must be > 0");
    if (!(gauge_step_ >= 0.0)) throw DomainError("TimeSeries: gauge step must be >= 0");
    std::size_t expect = 0;
    for (const auto& s : segments_) {
      if (s.offset != expect) throw PreconditionError("TimeSeries: segments must tile the value array");
      expect += s.length;
    }
    if (expect != values_.size()) throw PreconditionError("TimeSeries: segments must tile the value array");
  }

  // Single contiguous segment.
  TimeSeries(std::int64_t start, std::int64_t step_seconds, double gauge_step, std::vector<double> values)
      : TimeSeries(step_seconds, gauge_step, values, {Segment{start, 0, values.size()}}) {}

  [[nodiscard]] std::int64_t step_seconds() const noexcept { return step_seconds_; }
  [[nodiscard]] double step_minutes() const noexcept { return static_cast<double>(step_seconds_) / 60.0; }
  [[nodiscard]] double gauge_step() const noexcept { return gauge_step_; }
  [[nodiscard]] std::int64_t start() const noexcept { return segments_.empty() ? 0 : segments_.front().start; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const Segment> segments() const noexcept { return segments_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] std::int64_t time_of(const Segment& seg, std::size_t i) const noexcept {
    return seg.start + static_cast<std::int64_t>(i) * step_seconds_;
  }

  // Calendar months covered by the record: each step weighs 1 / (steps in its month).
  [[nodiscard]] double months_of_record() const {
    double months = 0.0;
    for (const auto& seg : segments_) {
      std::size_t i = 0;
      while (i < seg.length) {
        const std::int64_t t = time_of(seg, i);
        const auto c = calendar::date_of(t);
        const double steps_in_month =
            static_cast<double>(calendar::days_in_month(c.year, c.month)) * 86400.0 / static_cast<double>(step_seconds_);
        const std::int64_t boundary = calendar::next_month_start(t);
        auto remaining = static_cast<std::size_t>((boundary - t + step_seconds_ - 1) / step_seconds_);
        const std::size_t n = std::min(remaining, seg.length - i);
        months += static_cast<double>(n) / steps_in_month;
        i += n;
      }
    }
    return months;
  }

 private:
  std::int64_t step_seconds_;
  double gauge_step_;
  std::vector<double> values_;
  std::vector<Segment> segments_;
};

// Number of gauge ticks in an amount; the amount must be a tick multiple.
[[nodiscard]] inline std::int64_t to_ticks(double v, double h) { return std::llround(v / h); }

[[nodiscard]] inline bool is_gauge_multiple(double v, double h) {
  if (h <= 0.0) return true;
  return std::abs(v - static_cast<double>(to_ticks(v, h)) * h) <= 1e-9;
}

// ---------------------------------------------------------------------------
// Parsing

struct FormatOptions {
  char delimiter = ',';
  std::string timestamp_column = "0";  // header name or 0-based index
  std::string value_column = "1";
  std::string missing_sentinel;        // in addition to an empty field
  double gauge_step = kDefaultLatticeStep;
  std::int64_t step_seconds = 360;     // 0: infer from the first two rows
  bool fill_gaps = true;
  // Optional row filter, e.g. a station id column in multi-station files.
  std::string filter_column;
  std::string filter_value;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = line.find(delim, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::size_t resolve_column(const std::vector<std::string_view>& header, const std::string& spec,
                                  const char* role) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == spec) return i;
  }
  std::size_t idx = 0;
  auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), idx);
  if (ec == std::errc() && ptr == spec.data() + spec.size() && idx < header.size()) return idx;
  throw ParseError(std::string("no ") + role + " column '" + spec + "' in header", 1);
}

}  // namespace detail

[[nodiscard]] inline TimeSeries parse_series(std::istream& in, const FormatOptions& opt = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header_line = line;
      break;
    }
  }
  if (header_line.empty()) throw ParseError("empty input: header row required", line_no);
  header = detail::split(header_line, opt.delimiter);
  const std::size_t ts_col = detail::resolve_column(header, opt.timestamp_column, "timestamp");
  const std::size_t val_col = detail::resolve_column(header, opt.value_column, "value");
  const bool filtered = !opt.filter_column.empty();
  const std::size_t filter_col = filtered ? detail::resolve_column(header, opt.filter_column, "filter") : 0;

  std::vector<double> values;
  std::int64_t start = 0;
  std::int64_t last = 0;
  std::int64_t step = opt.step_seconds;
  bool have_first = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, opt.delimiter);
    const std::size_t need = std::max({ts_col, val_col, filtered ? filter_col : 0});
    if (fields.size() <= need) throw ParseError("expected at least " + std::to_string(need + 1) + " fields", line_no);
    if (filtered && detail::trim(fields[filter_col]) != opt.filter_value) continue;
    const auto t = calendar::parse_timestamp(fields[ts_col]);
    if (!t) throw ParseError("unreadable timestamp '" + std::string(fields[ts_col]) + "'", line_no);

    const std::string_view raw = detail::trim(fields[val_col]);
    double v = kMissing;
    if (!raw.empty() && raw != opt.missing_sentinel) {
      std::string buf(raw);
      std::replace(buf.begin(), buf.end(), ',', '.');  // decimal comma
      auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), v);
      if (ec != std::errc() || ptr != buf.data() + buf.size()) throw ParseError("unreadable value '" + buf + "'", line_no);
      if (!(v >= 0.0)) throw ParseError("negative amount " + buf, line_no);
      if (!is_gauge_multiple(v, opt.gauge_step)) {
        throw ParseError("amount " + buf + " is not a multiple of the gauge precision " + std::to_string(opt.gauge_step),
                         line_no);
      }
      if (opt.gauge_step > 0.0) v = static_cast<double>(to_ticks(v, opt.gauge_step)) * opt.gauge_step;
    }

    if (!have_first) {
      start = last = *t;
      have_first = true;
      values.push_back(v);
      continue;
    }
    const std::int64_t dt = *t - last;
    if (dt <= 0) throw ParseError("timestamps must be strictly increasing", line_no);
    if (step == 0) step = dt;
    if (dt % step != 0) throw ParseError("irregular time step (" + std::to_string(dt) + " s)", line_no);
    const std::int64_t k = dt / step;
    if (k > 1) {
      if (!opt.fill_gaps) throw ParseError("gap of " + std::to_string(k - 1) + " steps", line_no);
      values.insert(values.end(), static_cast<std::size_t>(k - 1), kMissing);
    }
    values.push_back(v);
    last = *t;
  }
  if (!have_first) throw ParseError("no data rows", line_no);
  if (step == 0) step = 360;
  return TimeSeries(start, step, opt.gauge_step, std::move(values));
}

[[nodiscard]] inline TimeSeries parse_series(const std::string& path, const FormatOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return parse_series(in, opt);
}

// Decimal places that represent multiples of h exactly (h = 0: shortest round trip).
[[nodiscard]] inline int gauge_decimals(double h) {
  if (h <= 0.0) return -1;
  for (int d = 0; d <= 9; ++d) {
    const double scaled = h * std::pow(10.0, d);
    if (std::abs(scaled - std::round(scaled)) < 1e-9 * std::max(1.0, scaled)) return d;
  }
  return 9;
}

[[nodiscard]] inline std::string format_amount(double v, int decimals) {
  char buf[64];
  if (decimals < 0) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  }
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Writes the two-column input format; gaps between segments are not written.
inline void write_series(std::ostream& out, const TimeSeries& series, char delimiter = ',') {
  const int decimals = gauge_decimals(series.gauge_step());
  out << "timestamp" << delimiter << "value_mm\n";
  for (const auto& seg : series.segments()) {
    for (std::size_t i = 0; i < seg.length; ++i) {
      out << calendar::format_timestamp(series.time_of(seg, i)) << delimiter;
      const double v = series.values()[seg.offset + i];
      if (!is_missing(v)) out << format_amount(v, decimals);
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Season selection and aggregation

[[nodiscard]] inline TimeSeries season_filter(const TimeSeries& series, const std::set<unsigned>& months) {
  std::vector<double> values;
  std::vector<Segment> segments;
  for (const auto& seg : series.segments()) {
    bool open = false;
    for (std::size_t i = 0; i < seg.length; ++i) {
      const std::int64_t t = series.time_of(seg, i);
      const bool keep = months.count(calendar::date_of(t).month) > 0;
      if (keep) {
        if (!open) {
          segments.push_back(Segment{t, values.size(), 0});
          open = true;
        }
        values.push_back(series.values()[seg.offset + i]);
        ++segments.back().length;
      } else {
        open = false;
      }
    }
  }
  if (values.empty()) throw DataError("season filter leaves no data");
  return TimeSeries(series.step_seconds(), series.gauge_step(), std::move(values), std::move(segments));
}

// Non-overlapping windows of d steps anchored at each segment start. Windows
// with a missing step are dropped; dry windows count toward the window rate
// but are not part of the positive sample.
[[nodiscard]] inline AggregatedSample aggregate(const TimeSeries& series, int d, double months_of_record = -1.0) {
  if (d < 1) throw DomainError("aggregate: duration must be >= 1");
  if (months_of_record < 0.0) months_of_record = series.months_of_record();
  AggregatedSample out;
  out.d = d;
  const double h = series.gauge_step();
  const auto vals = series.values();
  const auto dd = static_cast<std::size_t>(d);
  std::size_t retained = 0;
  for (const auto& seg : series.segments()) {
    const std::size_t windows = seg.length / dd;
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t first = seg.offset + w * dd;
      bool missing = false;
      std::int64_t ticks = 0;
      double sum = 0.0;
      for (std::size_t k = first; k < first + dd; ++k) {
        const double v = vals[k];
        if (is_missing(v)) {
          missing = true;
          break;
        }
        if (h > 0.0) {
          ticks += to_ticks(v, h);
        } else {
          sum += v;
        }
      }
      if (missing) continue;
      ++retained;
      const double total = h > 0.0 ? static_cast<double>(ticks) * h : sum;
      if (total > 0.0) out.values.push_back(total);
    }
  }
  if (months_of_record > 0.0) {
    out.n_obs_per_month = static_cast<double>(retained) / months_of_record;
    out.n_positive_per_month = static_cast<double>(out.values.size()) / months_of_record;
  }
  return out;
}

[[nodiscard]] inline std::vector<AggregatedSample> build_dataset(const TimeSeries& series, const DurationGrid& grid) {
  const double months = series.months_of_record();
  std::vector<AggregatedSample> out;
  out.reserve(grid.size());
  for (int d : grid.durations()) out.push_back(aggregate(series, d, months));
  return out;
}

[[nodiscard]] inline std::size_t total_positive(std::span<const AggregatedSample> samples) {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.values.size();
  return n;
}

}  // namespace msegpd
