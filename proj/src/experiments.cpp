#include "hmmconf/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hmmconf/errors.hpp"
#include "hmmconf/format.hpp"
#include "hmmconf/rng.hpp"

namespace hmmconf {

std::string preset_name(Preset preset) {
  switch (preset) {
    case Preset::two_state: return "two_state";
    case Preset::three_state: return "three_state";
    case Preset::three_state_iid: return "three_state_iid";
    case Preset::custom: return "custom";
  }
  return "custom";
}

std::optional<Preset> preset_from_name(const std::string& name) {
  if (name == "two_state" || name == "two-state") return Preset::two_state;
  if (name == "three_state" || name == "three-state") return Preset::three_state;
  if (name == "three_state_iid" || name == "three-state-iid") return Preset::three_state_iid;
  if (name == "custom") return Preset::custom;
  return std::nullopt;
}

HmmParams setup_two_state(double p, double b) {
  if (p < 0.0 || p > 1.0 || b < 0.0 || b > 1.0)
    throw Error("two-state parameters must lie in [0,1]");
  Matrix P{{p, 1.0 - p}, {1.0 - p, p}};
  Matrix B{{b, 1.0 - b}, {1.0 - b, b}};
  return validate_params(P, B);
}

HmmParams setup_three_state(double b, bool iid_variant) {
  if (b < 0.0 || b > 1.0) throw Error("observation parameter must lie in [0,1]");
  Matrix P{{0.1, 0.6, 0.3}, {0.3, 0.1, 0.6}, {0.6, 0.3, 0.1}};
  if (iid_variant) P = Matrix{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                              {1.0 / 3, 1.0 / 3, 1.0 / 3},
                              {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  const double h = (1.0 - b) / 2.0;
  Matrix B{{b, h, h}, {h, b, h}, {h, h, b}};
  return validate_params(P, B);
}

HmmParams preset_params(const ExperimentConfig& config) {
  switch (config.preset) {
    case Preset::two_state: return setup_two_state(config.p, config.b);
    case Preset::three_state: return setup_three_state(config.b, false);
    case Preset::three_state_iid: return setup_three_state(config.b, true);
    case Preset::custom:
      if (config.custom.n < 1) throw Error("custom preset requires parameters");
      return config.custom;
  }
  throw Error("unknown preset");
}

std::uint64_t resolve_budget(const ExperimentConfig& config) {
  if (config.permutation_budget) return *config.permutation_budget;
  const HmmParams params = preset_params(config);
  if (params.n <= 3 && config.T <= 200 && config.m <= 3) return kUnlimited;
  return 10000;
}

namespace {

IterationRecord run_iteration(const HmmParams& params, const ExperimentConfig& config,
                              std::uint64_t budget, int iteration) {
  const std::uint64_t seed = mix_seed(config.master_seed, static_cast<std::uint64_t>(iteration));
  const AugmentedSequence seq = simulate(params, config.T + config.m, seed);

  AugmentedSequence calibration(seq.begin(), seq.begin() + config.T);
  std::vector<int> test_obs(config.m), true_states(config.m);
  for (int k = 0; k < config.m; ++k) {
    test_obs[k] = seq[config.T + k].obs;
    true_states[k] = seq[config.T + k].state;
  }

  ConformalConfig cc;
  cc.alpha = config.alpha;
  cc.m = config.m;
  cc.permutation_budget = budget;
  cc.subsample_seed = mix_seed(seed, 0x7311eaf2);

  const PredictionSet ps = predict_hmm(params.n, params.M, calibration, test_obs, cc);
  const CandidateResult& truth = ps.result_for(true_states);

  IterationRecord rec;
  rec.hit = ps.is_member(truth);
  rec.set_size = ps.member_count();
  rec.true_blocks = truth.block_count;
  rec.true_perms = truth.perm_count;
  return rec;
}

}  // namespace

ExperimentReport run_coverage_experiment(const ExperimentConfig& config, int workers) {
  if (config.iterations < 1) throw Error("iterations must be >= 1");
  if (config.T < 2) throw TooShort("calibration length must be >= 2");
  const HmmParams params = preset_params(config);
  const std::uint64_t budget = resolve_budget(config);

  const auto start = std::chrono::steady_clock::now();
  std::vector<IterationRecord> records(config.iterations);

  if (workers <= 1) {
    for (int i = 0; i < config.iterations; ++i)
      records[i] = run_iteration(params, config, budget, i);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= config.iterations) return;
        try {
          records[i] = run_iteration(params, config, budget, i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min(workers, config.iterations);
    pool.reserve(count);
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  ExperimentReport report;
  report.config = config;
  report.records = std::move(records);

  double hits = 0, sizes = 0, blocks = 0, perms = 0;
  for (const auto& rec : report.records) {
    hits += rec.hit ? 1.0 : 0.0;
    sizes += static_cast<double>(rec.set_size);
    blocks += static_cast<double>(rec.true_blocks);
    perms += static_cast<double>(rec.true_perms);
  }
  const double iters = static_cast<double>(config.iterations);
  const double n_candidates = std::pow(static_cast<double>(params.n), config.m);
  report.empirical_coverage = hits / iters;
  report.scaled_set_size = sizes / iters / n_candidates;
  report.mean_blocks = blocks / iters;
  report.mean_perms = perms / iters;
  report.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

namespace {

bool uses_p(Preset preset) { return preset == Preset::two_state; }
bool uses_b(Preset preset) { return preset != Preset::custom; }

std::string config_csv_key(const ExperimentConfig& c) {
  std::ostringstream ss;
  ss << preset_name(c.preset) << ',';
  if (uses_p(c.preset)) ss << format_double(c.p);
  ss << ',';
  if (uses_b(c.preset)) ss << format_double(c.b);
  ss << ',' << c.T << ',' << c.m << ',' << format_double(c.alpha) << ',' << c.iterations
     << ',' << c.master_seed;
  return ss.str();
}

}  // namespace

std::string report_csv_header() {
  return "preset,p,b,T,m,alpha,iterations,master_seed,coverage,scaled_set_size,"
         "mean_blocks,mean_perms,wall_ms";
}

std::string report_csv_row(const ExperimentReport& report, bool timing) {
  if (!report.resumed_csv_row.empty()) return report.resumed_csv_row;
  std::ostringstream ss;
  ss << config_csv_key(report.config) << ',' << format_double(report.empirical_coverage)
     << ',' << format_double(report.scaled_set_size) << ','
     << format_double(report.mean_blocks) << ',' << format_double(report.mean_perms) << ','
     << (timing ? report.wall_ms : 0);
  return ss.str();
}

std::string reports_json(std::span<const ExperimentReport> reports, bool timing) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["preset"] = preset_name(r.config.preset);
    if (uses_p(r.config.preset))
      row["p"] = r.config.p;
    else
      row["p"] = nullptr;
    if (uses_b(r.config.preset))
      row["b"] = r.config.b;
    else
      row["b"] = nullptr;
    row["T"] = r.config.T;
    row["m"] = r.config.m;
    row["alpha"] = r.config.alpha;
    row["iterations"] = r.config.iterations;
    row["master_seed"] = r.config.master_seed;
    row["coverage"] = r.empirical_coverage;
    row["scaled_set_size"] = r.scaled_set_size;
    row["mean_blocks"] = r.mean_blocks;
    row["mean_perms"] = r.mean_perms;
    row["wall_ms"] = timing ? r.wall_ms : 0;
    arr.push_back(std::move(row));
  }
  return arr.dump(2) + "\n";
}

SweepOutcome grid_sweep(std::span<const ExperimentConfig> grid, const SweepOptions& options) {
  if (grid.empty()) throw Error("empty experiment grid");

  // Rows of a previous partial run, keyed by their config columns.
  std::map<std::string, std::string> existing;
  if (options.resume && !options.csv_path.empty() &&
      std::filesystem::exists(options.csv_path)) {
    std::istringstream in(read_text_file(options.csv_path));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != 13) continue;
      std::string key = fields[0];
      for (int i = 1; i < 8; ++i) key += ',' + fields[i];
      existing.emplace(std::move(key), line);
    }
  }

  SweepOutcome outcome;
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const auto& config = grid[idx];
    const std::string key = config_csv_key(config);
    try {
      if (auto it = existing.find(key); it != existing.end()) {
        ExperimentReport resumed;
        resumed.config = config;
        resumed.resumed_csv_row = it->second;
        const auto fields = split_csv_line(it->second);
        resumed.empirical_coverage = parse_double(fields[8]).value_or(0.0);
        resumed.scaled_set_size = parse_double(fields[9]).value_or(0.0);
        resumed.mean_blocks = parse_double(fields[10]).value_or(0.0);
        resumed.mean_perms = parse_double(fields[11]).value_or(0.0);
        resumed.wall_ms = parse_int(fields[12]).value_or(0);
        outcome.reports.push_back(std::move(resumed));
        continue;
      }
      outcome.reports.push_back(run_coverage_experiment(config, options.workers));
    } catch (const std::exception& e) {
      std::cerr << "grid row " << idx << " (" << key << ") failed: " << e.what() << "\n";
      outcome.failures.emplace_back(idx, e.what());
    }
  }

  if (!options.csv_path.empty()) {
    std::ostringstream csv;
    csv << report_csv_header() << '\n';
    for (const auto& r : outcome.reports) csv << report_csv_row(r, options.timing) << '\n';
    write_text_file(options.csv_path, csv.str());
  }
  if (!options.json_path.empty())
    write_text_file(options.json_path, reports_json(outcome.reports, options.timing));
  return outcome;
}

std::vector<ExperimentConfig> two_state_grid(std::uint64_t master_seed, int iterations) {
  const double ps[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  const double bs[] = {0.5, 0.75, 0.9};
  const int Ts[] = {50, 100, 200};
  const int ms[] = {1, 2, 3};
  std::vector<ExperimentConfig> grid;
  std::uint64_t row = 0;
  for (double p : ps)
    for (double b : bs)
      for (int T : Ts)
        for (int m : ms) {
          ExperimentConfig c;
          c.preset = Preset::two_state;
          c.p = p;
          c.b = b;
          c.T = T;
          c.m = m;
          c.alpha = 0.2;
          c.iterations = iterations;
          c.master_seed = mix_seed(master_seed, row++);
          grid.push_back(c);
        }
  return grid;
}

std::vector<ExperimentConfig> three_state_grid(std::uint64_t master_seed, int iterations) {
  const double bs[] = {1.0 / 3.0, 0.6, 0.9};
  const int Ts[] = {60, 90, 120, 150, 180};
  std::vector<ExperimentConfig> grid;
  std::uint64_t row = 0;
  for (Preset preset : {Preset::three_state, Preset::three_state_iid})
    for (double b : bs)
      for (int T : Ts) {
        ExperimentConfig c;
        c.preset = preset;
        c.b = b;
        c.T = T;
        c.m = 3;
        c.alpha = 0.2;
        c.iterations = iterations;
        c.master_seed = mix_seed(master_seed, row++);
        grid.push_back(c);
      }
  return grid;
}

}  // namespace hmmconf
