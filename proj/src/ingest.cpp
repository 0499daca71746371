#include "hmmconf/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "hmmconf/conformal.hpp"
#include "hmmconf/errors.hpp"
#include "hmmconf/format.hpp"
#include "hmmconf/rng.hpp"

namespace hmmconf {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string strip(const std::string& s) {
  std::size_t first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  std::size_t last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

QuantizationScheme sigma_band_scheme(int n_states) {
  if (n_states < 2) throw Error("need at least two states");
  QuantizationScheme scheme;
  scheme.n_states = n_states;
  // Half-integer cut points centered on zero: 5 states -> -1.5..1.5.
  for (int i = 0; i < n_states - 1; ++i)
    scheme.cut_points.push_back(static_cast<double>(i + 1) - n_states / 2.0);
  return scheme;
}

QuantizationScheme make_scheme(std::vector<double> cut_points) {
  if (cut_points.empty()) throw Error("need at least one cut point");
  for (std::size_t i = 0; i + 1 < cut_points.size(); ++i)
    if (!(cut_points[i] < cut_points[i + 1]))
      throw Error("cut points must be strictly increasing");
  QuantizationScheme scheme;
  scheme.n_states = static_cast<int>(cut_points.size()) + 1;
  scheme.cut_points = std::move(cut_points);
  return scheme;
}

TimeSeries load_series(const std::string& path, SeriesFormat format,
                       const std::string& column) {
  if (!std::filesystem::exists(path)) throw FileNotFound("no such file: " + path);
  std::istringstream in(read_text_file(path));

  TimeSeries series;
  series.source = path;

  std::string line;
  long row = 0;
  int value_col = -1;
  int time_col = -1;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++row;
    const std::string trimmed = strip(line);
    if (trimmed.empty()) continue;
    auto fields = split_csv_line(trimmed);

    if (row == 1) {
      if (format == SeriesFormat::csv_ohlc) {
        // Header is mandatory: we must locate the named column.
        for (std::size_t i = 0; i < fields.size(); ++i) {
          const std::string name = lower(strip(fields[i]));
          if (name == lower(column)) value_col = static_cast<int>(i);
          if (name == "date" || name == "timestamp" || name == "time")
            time_col = static_cast<int>(i);
        }
        if (value_col < 0)
          throw ParseError(row, "column '" + column + "' not found in header");
        saw_header = true;
        continue;
      }
      // Single column: a header row is optional; detect by parseability.
      if (!parse_double(strip(fields.back()))) {
        saw_header = true;
        value_col = static_cast<int>(fields.size()) - 1;
        if (fields.size() > 1) time_col = 0;
        continue;
      }
      value_col = static_cast<int>(fields.size()) - 1;
      if (fields.size() > 1) time_col = 0;
    }

    if (static_cast<std::size_t>(value_col) >= fields.size())
      throw ParseError(row, "missing value column");
    const auto value = parse_double(strip(fields[value_col]));
    if (!value) throw ParseError(row, "unparseable value '" + fields[value_col] + "'");
    if (!std::isfinite(*value)) throw ParseError(row, "non-finite value");
    series.values.push_back(*value);
    if (time_col >= 0 && static_cast<std::size_t>(time_col) < fields.size())
      series.timestamps.push_back(strip(fields[time_col]));
  }
  (void)saw_header;

  if (series.values.empty()) throw EmptySeries("no rows in " + path);
  if (series.values.size() < 2) throw TooShort("series needs at least two values");
  return series;
}

std::vector<int> quantize(const TimeSeries& series, const QuantizationScheme& scheme) {
  if (series.values.size() < 2) throw TooShort("series needs at least two values");
  const auto& v = series.values;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());  // population variance
  const double sd = std::sqrt(var);

  std::vector<int> states;
  states.reserve(v.size());
  if (sd == 0.0) {
    const int middle = scheme.n_states / 2;
    states.assign(v.size(), middle);
    return states;
  }
  for (double x : v) {
    const double z = (x - mean) / sd;
    // Left-closed bins: the bin index is the number of cut points <= z.
    const auto it = std::upper_bound(scheme.cut_points.begin(), scheme.cut_points.end(), z);
    states.push_back(static_cast<int>(it - scheme.cut_points.begin()));
  }
  return states;
}

std::vector<int> sign_states(const TimeSeries& series) {
  if (series.values.size() < 2) throw TooShort("series needs at least two values");
  std::vector<int> states;
  states.reserve(series.values.size() - 1);
  for (std::size_t t = 1; t < series.values.size(); ++t)
    states.push_back(series.values[t] >= series.values[t - 1] ? 1 : 0);
  return states;
}

AugmentedSequence to_lagged_hmm(std::span<const int> states) {
  if (states.size() < 2) throw TooShort("need at least two states");
  AugmentedSequence seq;
  seq.reserve(states.size() - 1);
  for (std::size_t t = 1; t < states.size(); ++t)
    seq.push_back({states[t], states[t - 1]});
  return seq;
}

BacktestReport backtest(std::span<const int> states, const BacktestConfig& config,
                        const std::string& source) {
  const int n = config.n_states;
  const int T = config.T;
  if (n < 1) throw Error("state count must be >= 1");
  if (T < 2) throw TooShort("calibration window must be >= 2");
  if (states.size() < static_cast<std::size_t>(T) + 2)
    throw TooShort("need at least T + 2 states for one test step");
  for (std::size_t t = 0; t < states.size(); ++t)
    if (states[t] < 0 || states[t] >= n)
      throw IndexOutOfRange("state out of range at position " + std::to_string(t));

  // Lagged pair k observes states[k] and hides states[k+1].
  const AugmentedSequence lagged = to_lagged_hmm(states);

  BacktestReport report;
  report.config = config;
  report.source = source;

  ConformalConfig cc;
  cc.alpha = config.alpha;
  cc.m = 1;
  cc.permutation_budget = config.permutation_budget.value_or(10000);

  double hits = 0, sizes = 0;
  for (std::size_t t = static_cast<std::size_t>(T) + 1; t < states.size(); ++t) {
    // Calibration: the T most recent pairs that involve no index >= t.
    const std::size_t begin = config.rolling ? t - T - 1 : 0;
    AugmentedSequence calibration(lagged.begin() + begin, lagged.begin() + begin + T);
    const int test_obs[] = {states[t - 1]};

    cc.subsample_seed = mix_seed(config.seed, t);
    const PredictionSet ps = predict_hmm(n, n, calibration, test_obs, cc);

    BacktestStep step;
    step.t = static_cast<int>(t);
    step.true_state = states[t];
    for (const auto& cand : ps.candidates)
      if (ps.is_member(cand)) step.set_members.push_back(cand.states[0]);
    const int truth[] = {states[t]};
    const CandidateResult& tc = ps.result_for(truth);
    step.hit = ps.is_member(tc);
    step.true_blocks = tc.block_count;
    step.true_perms = tc.perm_count;

    hits += step.hit ? 1.0 : 0.0;
    sizes += static_cast<double>(step.set_members.size());
    report.steps.push_back(std::move(step));
  }

  const double count = static_cast<double>(report.steps.size());
  report.coverage = hits / count;
  report.scaled_set_size = sizes / count / static_cast<double>(n);
  return report;
}

std::string backtest_steps_csv(const BacktestReport& report) {
  std::ostringstream ss;
  ss << "t,true_state,set_members,set_size,hit\n";
  for (const auto& step : report.steps) {
    ss << step.t << ',' << step.true_state << ',';
    for (std::size_t i = 0; i < step.set_members.size(); ++i) {
      if (i) ss << ';';
      ss << step.set_members[i];
    }
    ss << ',' << step.set_members.size() << ',' << (step.hit ? 1 : 0) << '\n';
  }
  return ss.str();
}

std::string backtest_summary_json(const BacktestReport& report) {
  nlohmann::ordered_json j;
  j["source"] = report.source;
  j["n_states"] = report.config.n_states;
  j["T"] = report.config.T;
  j["alpha"] = report.config.alpha;
  j["m"] = 1;
  j["window"] = report.config.rolling ? "rolling" : "fixed";
  j["steps"] = report.steps.size();
  j["coverage"] = report.coverage;
  j["scaled_set_size"] = report.scaled_set_size;
  return j.dump(2) + "\n";
}

}  // namespace hmmconf
