// Command-line front end: simulate / predict / experiment / backtest.
// Every subcommand is a pure function of its flags, input files and seed;
// reruns produce byte-identical outputs.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmmconf/conformal.hpp"
#include "hmmconf/errors.hpp"
#include "hmmconf/experiments.hpp"
#include "hmmconf/format.hpp"
#include "hmmconf/ingest.hpp"

namespace {

using namespace hmmconf;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  write_text_file(path, content);
}

HmmParams params_for_preset(const std::string& preset, std::optional<double> p,
                            std::optional<double> b) {
  auto named = preset_from_name(preset);
  if (!named || *named == Preset::custom)
    throw UsageError("unknown preset '" + preset + "'");
  if (*named == Preset::two_state) {
    if (!p) throw UsageError("--p is required for the two-state preset");
    if (!b) throw UsageError("--b is required for the two-state preset");
    return setup_two_state(*p, *b);
  }
  if (!b) throw UsageError("--b is required for the three-state presets");
  return setup_three_state(*b, *named == Preset::three_state_iid);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string preset = "two-state";
  std::optional<double> p, b;
  int length = 0;
  std::uint64_t seed = 0;
  std::string output;
};

int run_simulate(const SimulateArgs& args) {
  const HmmParams params = params_for_preset(args.preset, args.p, args.b);
  const AugmentedSequence seq = simulate(params, args.length, args.seed);
  std::ostringstream out;
  out << "state,observation\n";
  for (const auto& [x, y] : seq) out << x << ',' << y << '\n';
  write_output(args.output, out.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string calibration_path;
  std::string observations_path;
  double alpha = 0.2;
  std::optional<int> m;
  std::optional<int> n, M;
  std::uint64_t budget = 10000;
  std::uint64_t seed = 0;
  std::string output;
};

AugmentedSequence load_pairs(const std::string& path) {
  std::istringstream in(read_text_file(path));
  AugmentedSequence seq;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) throw ParseError(row, "expected two columns");
    auto x = parse_int(fields[0]);
    auto y = parse_int(strip_cr(fields[1]));
    if (!x || !y) {
      if (row == 1) continue;  // header
      throw ParseError(row, "unparseable pair");
    }
    if (*x < 0 || *y < 0) throw ParseError(row, "negative index");
    seq.push_back({static_cast<int>(*x), static_cast<int>(*y)});
  }
  if (seq.empty()) throw EmptySeries("no pairs in " + path);
  return seq;
}

std::vector<int> load_observations(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<int> obs;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    auto y = parse_int(strip_cr(fields.back()));
    if (!y) {
      if (row == 1) continue;  // header
      throw ParseError(row, "unparseable observation");
    }
    if (*y < 0) throw ParseError(row, "negative index");
    obs.push_back(static_cast<int>(*y));
  }
  if (obs.empty()) throw EmptySeries("no observations in " + path);
  return obs;
}

int run_predict(const PredictArgs& args) {
  const AugmentedSequence calibration = load_pairs(args.calibration_path);
  const std::vector<int> test_obs = load_observations(args.observations_path);

  int n = 0, M = 0;
  for (const auto& [x, y] : calibration) {
    n = std::max(n, x + 1);
    M = std::max(M, y + 1);
  }
  for (int y : test_obs) M = std::max(M, y + 1);
  if (args.n) n = *args.n;
  if (args.M) M = *args.M;

  ConformalConfig config;
  config.alpha = args.alpha;
  config.m = args.m.value_or(static_cast<int>(test_obs.size()));
  config.permutation_budget = args.budget == 0 ? kUnlimited : args.budget;
  config.subsample_seed = args.seed;

  const PredictionSet ps = predict_hmm(n, M, calibration, test_obs, config);

  nlohmann::ordered_json j;
  j["n"] = n;
  j["M"] = M;
  j["T"] = calibration.size();
  j["m"] = ps.horizon;
  j["alpha"] = ps.alpha;
  j["members"] = ps.members();
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const auto& c : ps.candidates) {
    nlohmann::ordered_json row;
    row["states"] = c.states;
    row["q"] = c.quantile;
    row["blocks"] = c.block_count;
    row["perms"] = c.perm_count;
    row["approximate"] = c.approximate;
    row["member"] = ps.is_member(c);
    cands.push_back(std::move(row));
  }
  j["candidates"] = std::move(cands);
  write_output(args.output, j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  std::string preset;
  std::optional<double> p, b;
  int T = 100;
  int m = 1;
  double alpha = 0.2;
  int iterations = 500;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> budget;
  std::string output = "experiment.csv";
  std::string json_path;
  int workers = 1;
  bool resume = false;
  bool timing = false;
};

int run_experiment(const ExperimentArgs& args) {
  std::vector<ExperimentConfig> grid;
  if (args.preset == "fig1") {
    grid = two_state_grid(args.seed, args.iterations);
  } else if (args.preset == "fig2") {
    grid = three_state_grid(args.seed, args.iterations);
  } else {
    auto named = preset_from_name(args.preset);
    if (!named || *named == Preset::custom)
      throw UsageError("unknown preset '" + args.preset + "'");
    ExperimentConfig c;
    c.preset = *named;
    if (*named == Preset::two_state) {
      if (!args.p) throw UsageError("--p is required for the two-state preset");
      c.p = *args.p;
    }
    if (!args.b) throw UsageError("--b is required for preset '" + args.preset + "'");
    c.b = *args.b;
    c.T = args.T;
    c.m = args.m;
    c.alpha = args.alpha;
    c.iterations = args.iterations;
    c.master_seed = args.seed;
    grid.push_back(c);
  }
  if (args.budget)
    for (auto& c : grid)
      c.permutation_budget = *args.budget == 0 ? kUnlimited : *args.budget;

  SweepOptions options;
  options.csv_path = args.output;
  options.json_path = args.json_path;
  options.workers = args.workers;
  options.resume = args.resume;
  options.timing = args.timing;

  const SweepOutcome outcome = grid_sweep(grid, options);
  std::cerr << outcome.reports.size() << " of " << grid.size() << " rows written to "
            << args.output << "\n";
  return outcome.failures.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
  std::string input;
  std::string input_format = "column";
  std::string column = "close";
  std::optional<int> states;
  std::string scheme;  // comma-separated cut points
  bool sign = false;
  int T = 100;
  double alpha = 0.2;
  std::string window = "rolling";
  std::optional<std::uint64_t> budget;
  std::uint64_t seed = 0;
  std::string output_steps = "backtest_steps.csv";
  std::string output_summary = "backtest_summary.json";
};

int run_backtest(const BacktestArgs& args) {
  SeriesFormat format;
  if (args.input_format == "column")
    format = SeriesFormat::csv_column;
  else if (args.input_format == "ohlc")
    format = SeriesFormat::csv_ohlc;
  else
    throw UsageError("--input-format must be 'column' or 'ohlc'");

  const TimeSeries series = load_series(args.input, format, args.column);

  std::vector<int> states;
  int n = 0;
  if (args.sign) {
    states = sign_states(series);
    n = 2;
    if (args.states && *args.states != 2)
      throw UsageError("--sign implies two states");
  } else {
    QuantizationScheme scheme;
    if (!args.scheme.empty()) {
      std::vector<double> cuts;
      for (const auto& field : split_csv_line(args.scheme)) {
        auto c = parse_double(field);
        if (!c) throw UsageError("bad cut point '" + field + "'");
        cuts.push_back(*c);
      }
      scheme = make_scheme(std::move(cuts));
      if (args.states && *args.states != scheme.n_states)
        throw UsageError("--states disagrees with --scheme");
    } else {
      if (!args.states) throw UsageError("--states (or --scheme/--sign) is required");
      scheme = sigma_band_scheme(*args.states);
    }
    states = quantize(series, scheme);
    n = scheme.n_states;
  }

  BacktestConfig config;
  config.n_states = n;
  config.T = args.T;
  config.alpha = args.alpha;
  if (args.window == "rolling")
    config.rolling = true;
  else if (args.window == "fixed")
    config.rolling = false;
  else
    throw UsageError("--window must be 'rolling' or 'fixed'");
  if (args.budget) config.permutation_budget = *args.budget == 0 ? kUnlimited : *args.budget;
  config.seed = args.seed;

  const BacktestReport report = backtest(states, config, series.source);
  write_output(args.output_steps, backtest_steps_csv(report));
  const std::string summary = backtest_summary_json(report);
  write_output(args.output_summary, summary);
  std::cout << summary;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction sets for hidden Markov models"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file ([subcommand] sections)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw an augmented (state,observation) sequence");
  sim_cmd->add_option("--preset", sim.preset, "two-state | three-state | three-state-iid");
  sim_cmd->add_option("--p", sim.p, "transition parameter (two-state)");
  sim_cmd->add_option("--b", sim.b, "observation parameter");
  sim_cmd->add_option("--length", sim.length, "sequence length")->required();
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--output", sim.output, "CSV path (default stdout)");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "prediction set for a hidden sequence");
  pred_cmd->add_option("--calibration", pred.calibration_path, "state,observation CSV")->required();
  pred_cmd->add_option("--observations", pred.observations_path, "test observations, one per line")->required();
  pred_cmd->add_option("--alpha", pred.alpha, "miscoverage level");
  pred_cmd->add_option("--m", pred.m, "horizon (default: number of observations)");
  pred_cmd->add_option("--n", pred.n, "state count (default: inferred)");
  pred_cmd->add_option("--M", pred.M, "observation count (default: inferred)");
  pred_cmd->add_option("--budget", pred.budget, "max permutations per candidate, 0 = unlimited");
  pred_cmd->add_option("--seed", pred.seed, "seed for budget subsampling");
  pred_cmd->add_option("--output", pred.output, "JSON path (default stdout)");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Monte-Carlo coverage experiments");
  exp_cmd->add_option("--preset", exp.preset,
                      "fig1 | fig2 | two-state | three-state | three-state-iid")->required();
  exp_cmd->add_option("--p", exp.p, "transition parameter (two-state)");
  exp_cmd->add_option("--b", exp.b, "observation parameter");
  exp_cmd->add_option("--T", exp.T, "calibration length");
  exp_cmd->add_option("--m", exp.m, "horizon");
  exp_cmd->add_option("--alpha", exp.alpha, "miscoverage level");
  exp_cmd->add_option("--iterations", exp.iterations, "Monte-Carlo iterations");
  exp_cmd->add_option("--seed", exp.seed, "master seed");
  exp_cmd->add_option("--budget", exp.budget, "max permutations per candidate, 0 = unlimited");
  exp_cmd->add_option("--output", exp.output, "CSV path");
  exp_cmd->add_option("--json", exp.json_path, "also write a JSON report");
  exp_cmd->add_option("--workers", exp.workers, "worker threads (output is identical for any count)");
  exp_cmd->add_flag("--resume", exp.resume, "reuse matching rows of an existing CSV");
  exp_cmd->add_flag("--timing", exp.timing, "emit measured wall_ms (breaks rerun byte-identity)");

  BacktestArgs bt;
  auto* bt_cmd = app.add_subcommand("backtest", "rolling one-step-ahead evaluation on a series");
  bt_cmd->add_option("--input", bt.input, "CSV time series")->required();
  bt_cmd->add_option("--input-format", bt.input_format, "column | ohlc");
  bt_cmd->add_option("--column", bt.column, "value column for ohlc input");
  bt_cmd->add_option("--states", bt.states, "sigma-band state count");
  bt_cmd->add_option("--scheme", bt.scheme, "comma-separated z-score cut points");
  bt_cmd->add_flag("--sign", bt.sign, "binary gain/loss states instead of sigma bands");
  bt_cmd->add_option("--T", bt.T, "calibration window (in lagged pairs)");
  bt_cmd->add_option("--alpha", bt.alpha, "miscoverage level");
  bt_cmd->add_option("--window", bt.window, "rolling | fixed");
  bt_cmd->add_option("--budget", bt.budget, "max permutations per candidate, 0 = unlimited");
  bt_cmd->add_option("--seed", bt.seed, "seed for budget subsampling");
  bt_cmd->add_option("--output-steps", bt.output_steps, "per-step CSV path");
  bt_cmd->add_option("--output-summary", bt.output_summary, "summary JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (pred_cmd->parsed()) return run_predict(pred);
    if (exp_cmd->parsed()) return run_experiment(exp);
    if (bt_cmd->parsed()) return run_backtest(bt);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hmmconf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
