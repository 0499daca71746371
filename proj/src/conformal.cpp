#include "hmmconf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmmconf/errors.hpp"

namespace hmmconf {

namespace {

// Filter recursion evaluated at the realized trailing states. tail has m+1
// pairs: tail[0] supplies the conditioning state (its observation plays no
// role), tail[1..m] supply the observations and the states whose posterior
// probabilities enter the score. Shared by every scoring path so that equal
// trailing windows always produce bit-identical scores.
double score_tail(const HmmParams& params, std::span<const StateObs> tail,
                  std::vector<double>& p, std::vector<double>& next) {
  const int n = params.n;
  const int m = static_cast<int>(tail.size()) - 1;
  p.assign(n, 0.0);
  p[tail[0].state] = 1.0;
  double total = 0.0;
  for (int k = 1; k <= m; ++k) {
    const int y = tail[k].obs;
    next.assign(n, 0.0);
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += params.P(j, i) * p[j];
      next[i] = params.B(i, y) * acc;
      norm += next[i];
    }
    if (norm <= 0.0) return 1.0;  // impossible observation: worst agreement
    for (int i = 0; i < n; ++i) p[i] = next[i] / norm;
    total += p[tail[k].state];
  }
  return 1.0 - total / m;
}

// Trailing `count` positions of prefix + blocks[order[0]] + ... + without
// materializing the arrangement.
void tail_of_arrangement(const BlockPartition& partition, std::span<const int> order,
                         std::size_t count, std::vector<StateObs>& out) {
  out.resize(count);
  std::size_t filled = 0;
  for (auto it = order.rbegin(); it != order.rend() && filled < count; ++it) {
    const auto& block = partition.blocks[*it];
    for (auto bit = block.rbegin(); bit != block.rend() && filled < count; ++bit)
      out[count - 1 - filled++] = *bit;
  }
  for (auto it = partition.prefix.rbegin();
       it != partition.prefix.rend() && filled < count; ++it)
    out[count - 1 - filled++] = *it;
}

struct ScoreEntry {
  std::uint64_t weight = 0;
  double score = 0.0;
};

// Exact evaluation of q(x) without enumerating every arrangement.
//
// The final block of the partition is the bare anchor pair; it stays pinned
// in place, because only arrangements that end at an anchor occurrence leave
// the transition-pair multiset (and hence the joint probability) unchanged.
// The d-1 preceding blocks are arranged freely into the last m+1 movable
// slots.
//
// The score of an arrangement depends only on its trailing m+1 positions:
// the pinned anchor plus the last m positions of the arranged blocks, which
// are fixed by the shortest run of final slots covering m positions. The
// recursion walks those runs over *distinct block contents*, so arrangements
// sharing a trailing window collapse into one weighted entry. The weights
// add up exactly to the full arrangement count.
class GroupedTailScorer {
 public:
  GroupedTailScorer(const HmmParams& params, const BlockPartition& partition, int m)
      : params_(params),
        anchor_(partition.anchor),
        m_(m),
        d_(static_cast<int>(partition.blocks.size()) - 1) {
    std::map<AugmentedSequence, int> grouped;
    for (std::size_t i = 0; i + 1 < partition.blocks.size(); ++i)
      grouped[partition.blocks[i]] += 1;
    for (auto& [content, mult] : grouped) contents_.push_back({content, mult});

    // Pack a trailing window into a base-(nM+1) integer when it fits, else
    // fall back to ordered map keys.
    pair_codes_ = static_cast<std::uint64_t>(params.n) * params.M + 1;
    double bits = (m_ + 1) * std::log2(static_cast<double>(pair_codes_));
    packable_ = bits < 63.0;
  }

  // Returns the total weight of arrangements whose score is >= threshold.
  std::uint64_t weight_at_or_above(double threshold) {
    window_.resize(m_ + 1);
    chosen_len_.clear();
    chosen_group_.clear();
    recurse(0, 0, 1);

    std::uint64_t geq = 0;
    for (const auto& [key, e] : packed_)
      if (e.score >= threshold) geq += e.weight;
    for (const auto& [key, e] : generic_)
      if (e.score >= threshold) geq += e.weight;
    return geq;
  }

  std::uint64_t total_weight() const {
    std::uint64_t total = 0;
    for (const auto& [key, e] : packed_) total += e.weight;
    for (const auto& [key, e] : generic_) total += e.weight;
    return total;
  }

 private:
  struct Group {
    AugmentedSequence content;
    int multiplicity;
  };

  void recurse(int depth, int cum_len, std::uint64_t weight) {
    if (cum_len >= m_) {
      record(depth, weight);
      return;
    }
    for (std::size_t g = 0; g < contents_.size(); ++g) {
      int avail = contents_[g].multiplicity - used_count(g);
      if (avail <= 0) continue;
      chosen_group_.push_back(static_cast<int>(g));
      chosen_len_.push_back(static_cast<int>(contents_[g].content.size()));
      recurse(depth + 1, cum_len + chosen_len_.back(),
              weight * static_cast<std::uint64_t>(avail));
      chosen_group_.pop_back();
      chosen_len_.pop_back();
    }
  }

  int used_count(std::size_t g) const {
    int c = 0;
    for (int cg : chosen_group_)
      if (cg == static_cast<int>(g)) ++c;
    return c;
  }

  void record(int depth, std::uint64_t weight) {
    // Arrangements extending this minimal suffix: ordered choices for the
    // remaining m+1-depth movable tail slots out of the d-depth unused blocks.
    for (int k = depth; k <= m_; ++k)
      weight *= static_cast<std::uint64_t>(d_ - k);

    // The pinned anchor ends the window; chosen_group_[0] occupies the final
    // movable slot and deeper choices sit earlier.
    const std::size_t count = static_cast<std::size_t>(m_) + 1;
    window_[count - 1] = anchor_;
    std::size_t filled = 1;
    for (int c = 0; c < depth && filled < count; ++c) {
      const auto& content = contents_[chosen_group_[c]].content;
      for (auto it = content.rbegin(); it != content.rend() && filled < count; ++it)
        window_[count - 1 - filled++] = *it;
    }
    window_[0].obs = 0;  // the conditioning position's observation is unused

    if (packable_) {
      std::uint64_t key = 0;
      for (const auto& so : window_)
        key = key * pair_codes_ +
              static_cast<std::uint64_t>(so.state) * params_.M + so.obs + 1;
      auto [it, inserted] = packed_.try_emplace(key);
      if (inserted) it->second.score = score_tail(params_, window_, buf_p_, buf_next_);
      it->second.weight += weight;
    } else {
      auto [it, inserted] = generic_.try_emplace(window_);
      if (inserted) it->second.score = score_tail(params_, window_, buf_p_, buf_next_);
      it->second.weight += weight;
    }
  }

  const HmmParams& params_;
  StateObs anchor_;
  int m_;
  int d_;
  std::vector<Group> contents_;
  bool packable_ = false;
  std::uint64_t pair_codes_ = 0;
  std::unordered_map<std::uint64_t, ScoreEntry> packed_;
  std::map<std::vector<StateObs>, ScoreEntry> generic_;
  std::vector<int> chosen_group_;
  std::vector<int> chosen_len_;
  std::vector<StateObs> window_;
  std::vector<double> buf_p_, buf_next_;
};

// The last block is always the bare anchor pair and stays pinned: only
// arrangements that still end at an anchor occurrence preserve the
// transition-pair multiset, which is what makes them valid randomizations.
// The remaining d-1 blocks are arranged through the tail-arrangement set.
CandidateResult evaluate_candidate(int n, int M, const AugmentedSequence& full,
                                   const ConformalConfig& config,
                                   std::vector<int> states) {
  const int m = config.m;
  CandidateResult result;
  result.states = std::move(states);

  const HmmParams params = estimate_params(full, n, M);
  const BlockPartition partition = partition_blocks(full);
  const int d = static_cast<int>(partition.blocks.size());
  result.block_count = d;

  const int movable = d - 1;
  if (movable == 0) {
    // Only the pinned anchor: the identity is the whole set.
    result.quantile = 1.0;
    result.perm_count = 1;
    return result;
  }

  const std::uint64_t cardinality = tail_arrangement_count(movable, m);
  const bool budgeted =
      config.permutation_budget != kUnlimited && cardinality > config.permutation_budget;

  std::vector<double> buf_p, buf_next;
  std::vector<StateObs> tail(full.end() - (m + 1), full.end());
  const double s_identity = score_tail(params, tail, buf_p, buf_next);

  const auto score_order = [&](std::vector<int>& order, std::vector<StateObs>& window) {
    order.push_back(movable);  // pinned anchor block
    tail_of_arrangement(partition, order, static_cast<std::size_t>(m) + 1, window);
    order.pop_back();
    return score_tail(params, window, buf_p, buf_next);
  };

  if (budgeted) {
    PermutationSet pset = enumerate_tail_arrangements(movable, m, config.permutation_budget,
                                                      config.subsample_seed);
    std::uint64_t geq = 0;
    std::vector<StateObs> window;
    for (auto& perm : pset.perms)
      if (score_order(perm, window) >= s_identity) ++geq;
    result.quantile = static_cast<double>(geq) / static_cast<double>(pset.perms.size());
    result.perm_count = pset.perms.size();
    result.approximate = true;
    return result;
  }

  if (movable <= m + 1) {
    // Few movable blocks: all their orders, which may pull prefix pairs into
    // the scoring window.
    std::vector<int> perm(movable);
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t geq = 0, count = 0;
    std::vector<StateObs> window;
    do {
      if (score_order(perm, window) >= s_identity) ++geq;
      ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    result.quantile = static_cast<double>(geq) / static_cast<double>(count);
    result.perm_count = count;
    return result;
  }

  if (cardinality >= (std::uint64_t(1) << 62))
    throw CandidateExplosion("arrangement count too large; set a permutation budget");

  GroupedTailScorer scorer(params, partition, m);
  std::uint64_t geq = scorer.weight_at_or_above(s_identity);
  result.quantile = static_cast<double>(geq) / static_cast<double>(cardinality);
  result.perm_count = cardinality;
  return result;
}

}  // namespace

double conformity_score(const HmmParams& params, const AugmentedSequence& permuted, int m) {
  if (m < 1) throw Error("horizon must be >= 1");
  if (permuted.size() < static_cast<std::size_t>(m) + 1)
    throw TooShort("sequence shorter than m + 1");
  std::span<const StateObs> tail(permuted.data() + permuted.size() - (m + 1),
                                 static_cast<std::size_t>(m) + 1);
  for (const auto& so : tail)
    if (so.state < 0 || so.state >= params.n || so.obs < 0 || so.obs >= params.M)
      throw IndexOutOfRange("trailing pair out of range");
  std::vector<double> p, next;
  return score_tail(params, tail, p, next);
}

double quantile_rank(std::span<const double> scores, std::size_t identity_index) {
  if (scores.empty()) throw TooShort("no scores");
  if (identity_index >= scores.size()) throw IndexOutOfRange("identity index out of range");
  const double s_identity = scores[identity_index];
  std::size_t geq = 0;
  for (double s : scores)
    if (s >= s_identity) ++geq;
  return static_cast<double>(geq) / static_cast<double>(scores.size());
}

std::size_t PredictionSet::member_count() const {
  std::size_t c = 0;
  for (const auto& cand : candidates)
    if (is_member(cand)) ++c;
  return c;
}

std::vector<std::vector<int>> PredictionSet::members() const {
  std::vector<std::vector<int>> out;
  for (const auto& cand : candidates)
    if (is_member(cand)) out.push_back(cand.states);
  return out;
}

bool PredictionSet::contains(std::span<const int> states) const {
  return is_member(result_for(states));
}

const CandidateResult& PredictionSet::result_for(std::span<const int> states) const {
  if (states.size() != static_cast<std::size_t>(horizon))
    throw LengthMismatch("candidate length != horizon");
  // Candidates are stored in lexicographic order, so the index is the
  // base-n expansion of the state sequence.
  const auto& probe = candidates;
  std::size_t lo = 0, hi = probe.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (std::lexicographical_compare(probe[mid].states.begin(), probe[mid].states.end(),
                                     states.begin(), states.end()))
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo == probe.size() ||
      !std::equal(probe[lo].states.begin(), probe[lo].states.end(), states.begin(),
                  states.end()))
    throw IndexOutOfRange("candidate not present");
  return probe[lo];
}

PredictionSet predict_hmm(int n, int M, const AugmentedSequence& calibration,
                          std::span<const int> test_obs, const ConformalConfig& config) {
  if (n < 1 || M < 1) throw ShapeError("state and observation counts must be >= 1");
  if (config.m < 1) throw Error("horizon must be >= 1");
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw Error("alpha must lie in (0,1)");
  if (test_obs.size() != static_cast<std::size_t>(config.m))
    throw LengthMismatch("observation count != configured horizon");
  if (calibration.size() < 2) throw TooShort("calibration needs at least two pairs");
  validate_sequence(calibration, n, M);
  for (int y : test_obs)
    if (y < 0 || y >= M) throw IndexOutOfRange("test observation out of range");

  const int m = config.m;
  std::uint64_t n_candidates = 1;
  for (int k = 0; k < m; ++k) {
    n_candidates *= static_cast<std::uint64_t>(n);
    if (n_candidates > 1000000) throw CandidateExplosion("n^m exceeds 10^6 candidates");
  }

  AugmentedSequence full = calibration;
  full.resize(calibration.size() + m);
  const std::size_t T = calibration.size();

  PredictionSet out;
  out.horizon = m;
  out.alpha = config.alpha;
  out.candidates.reserve(n_candidates);

  std::vector<int> states(m, 0);
  for (std::uint64_t idx = 0; idx < n_candidates; ++idx) {
    for (int k = 0; k < m; ++k) full[T + k] = {states[k], test_obs[k]};
    out.candidates.push_back(evaluate_candidate(n, M, full, config, states));

    int pos = m - 1;  // lexicographic odometer
    while (pos >= 0 && states[pos] == n - 1) states[pos--] = 0;
    if (pos >= 0) ++states[pos];
  }
  return out;
}

ClassicalScore counting_score(const AugmentedSequence& calibration, int n, int M) {
  const HmmParams est = estimate_params(calibration, n, M);
  Matrix B = est.B;
  return [B](int state, int obs) { return 1.0 - B(state, obs); };
}

std::vector<int> classical_predict(int n, const AugmentedSequence& calibration,
                                   int test_obs, double alpha,
                                   const ClassicalScore& score) {
  if (calibration.empty()) throw TooShort("calibration must be nonempty");
  const std::size_t T = calibration.size();

  std::vector<double> cal_scores;
  cal_scores.reserve(T);
  for (const auto& [x, y] : calibration) cal_scores.push_back(score(x, y));

  // Tolerant ceiling: (1-alpha)(T+1) computed in binary can land a hair above
  // an exact integer, which would otherwise admit one extra rank.
  const double raw = (1.0 - alpha) * static_cast<double>(T + 1);
  const auto threshold = static_cast<long long>(std::ceil(raw - 1e-9));

  std::vector<int> included;
  for (int i = 0; i < n; ++i) {
    const double s = score(i, test_obs);
    long long rank = 1;  // the candidate's own score counts
    for (double cs : cal_scores)
      if (cs <= s) ++rank;
    if (rank <= threshold) included.push_back(i);
  }
  return included;
}

}  // namespace hmmconf
