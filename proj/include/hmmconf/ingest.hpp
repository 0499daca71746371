#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmmconf/hmm.hpp"

namespace hmmconf {

struct TimeSeries {
  std::vector<std::string> timestamps;  // empty, or one ISO-8601 string per value
  std::vector<double> values;
  std::string source;
};

// Bins over z-scores: value v maps to the bin of (v - mean) / std under the
// cut points. Bins are left-closed, so a z exactly at a cut point falls in
// the bin to its right.
struct QuantizationScheme {
  int n_states = 0;
  std::vector<double> cut_points;  // n_states - 1, strictly increasing, z units
};

// Default sigma-band scheme: cut points at half-integer z values centered on
// zero (5 states -> [-1.5, -0.5, 0.5, 1.5]; 7 states adds +-2.5).
QuantizationScheme sigma_band_scheme(int n_states);
QuantizationScheme make_scheme(std::vector<double> cut_points);

enum class SeriesFormat { csv_column, csv_ohlc };

// Loads a single-column CSV (optional header) or an OHLC CSV, projecting the
// named column (default "close"). Malformed rows raise ParseError with the
// 1-based row number.
TimeSeries load_series(const std::string& path, SeriesFormat format,
                       const std::string& column = "close");

// z-scores against the series mean and population standard deviation, then
// bins. A constant series (zero std) maps every value to the middle bin.
std::vector<int> quantize(const TimeSeries& series, const QuantizationScheme& scheme);

// Binary gain/loss states: 1 iff v_t >= v_{t-1} (ties count as gains).
// Output has one state per consecutive pair.
std::vector<int> sign_states(const TimeSeries& series);

// Lagged-observation view: the current state is the measurement for the next
// one, pairs (x_t = states[t], y_t = states[t-1]) for t = 1..end. The
// observation space equals the state space.
AugmentedSequence to_lagged_hmm(std::span<const int> states);

struct BacktestConfig {
  int n_states = 0;
  int T = 100;          // calibration window, in lagged pairs
  double alpha = 0.2;
  bool rolling = true;  // false: calibrate once on the first T pairs
  std::optional<std::uint64_t> permutation_budget;  // unset: 10000
  std::uint64_t seed = 0;  // only used if the permutation budget binds
};

struct BacktestStep {
  int t = 0;  // index of the predicted state in the input list
  int true_state = 0;
  std::vector<int> set_members;
  bool hit = false;
  int true_blocks = 0;
  std::uint64_t true_perms = 0;
};

struct BacktestReport {
  BacktestConfig config;
  std::string source;
  std::vector<BacktestStep> steps;
  double coverage = 0.0;
  double scaled_set_size = 0.0;  // mean |C| / n
};

// Rolling-origin one-step-ahead evaluation: for each t from T+1 to the end,
// calibrate on the most recent T lagged pairs (all strictly before t),
// predict the set for states[t] from the lagged observation states[t-1], and
// record the hit. The calibration window never touches indices >= t.
BacktestReport backtest(std::span<const int> states, const BacktestConfig& config,
                        const std::string& source = "");

std::string backtest_steps_csv(const BacktestReport& report);
std::string backtest_summary_json(const BacktestReport& report);

}  // namespace hmmconf
