#include "hmmconf/hmm.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "hmmconf/errors.hpp"
#include "hmmconf/rng.hpp"

namespace hmmconf {

namespace {

void check_stochastic(const Matrix& mat, const char* name) {
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < mat.cols(); ++j) {
      double v = mat(i, j);
      if (v < 0.0)
        throw NegativeEntryError(std::string(name) + " has negative entry at row " +
                                 std::to_string(i));
      if (v > 1.0 + kRowSumTol)
        throw NegativeEntryError(std::string(name) + " has entry > 1 at row " +
                                 std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw RowSumError(std::string(name) + " row " + std::to_string(i) + " sums to " +
                        std::to_string(sum));
  }
}

}  // namespace

HmmParams validate_params(const Matrix& P, const Matrix& B) {
  if (P.rows() == 0 || P.rows() != P.cols())
    throw ShapeError("transition matrix must be square and nonempty");
  if (B.rows() != P.rows() || B.cols() == 0)
    throw ShapeError("observation matrix must have one row per state");
  check_stochastic(P, "P");
  check_stochastic(B, "B");
  return HmmParams{static_cast<int>(P.rows()), static_cast<int>(B.cols()), P, B};
}

void validate_sequence(const AugmentedSequence& seq, int n, int M) {
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& [x, y] = seq[t];
    if (x < 0 || x >= n || y < 0 || y >= M)
      throw IndexOutOfRange("pair out of range at position " + std::to_string(t));
  }
}

AugmentedSequence simulate(const HmmParams& params, int length, std::uint64_t seed) {
  if (length < 1) throw TooShort("simulation length must be >= 1");
  Rng rng(seed);
  AugmentedSequence seq;
  seq.reserve(static_cast<std::size_t>(length));
  int x = rng.uniform_index(params.n);
  for (int t = 0; t < length; ++t) {
    if (t > 0) x = rng.categorical({params.P.row_ptr(x), static_cast<std::size_t>(params.n)});
    int y = rng.categorical({params.B.row_ptr(x), static_cast<std::size_t>(params.M)});
    seq.push_back({x, y});
  }
  return seq;
}

HmmParams estimate_params(const AugmentedSequence& seq, int n, int M) {
  if (seq.size() < 2) throw TooShort("need at least two pairs to estimate");
  validate_sequence(seq, n, M);

  std::vector<std::int64_t> trans(static_cast<std::size_t>(n) * n, 0);
  std::vector<std::int64_t> emit(static_cast<std::size_t>(n) * M, 0);
  std::vector<std::int64_t> visits_head(n, 0);  // first L-1 positions
  std::vector<std::int64_t> visits_all(n, 0);

  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& [x, y] = seq[t];
    visits_all[x] += 1;
    emit[static_cast<std::size_t>(x) * M + y] += 1;
    if (t + 1 < seq.size()) {
      visits_head[x] += 1;
      trans[static_cast<std::size_t>(x) * n + seq[t + 1].state] += 1;
    }
  }

  Matrix P(n, n), B(n, M);
  for (int i = 0; i < n; ++i) {
    if (visits_head[i] == 0) {
      for (int j = 0; j < n; ++j) P(i, j) = 1.0 / n;
    } else {
      for (int j = 0; j < n; ++j)
        P(i, j) = static_cast<double>(trans[static_cast<std::size_t>(i) * n + j]) /
                  static_cast<double>(visits_head[i]);
    }
    if (visits_all[i] == 0) {
      for (int j = 0; j < M; ++j) B(i, j) = 1.0 / M;
    } else {
      for (int j = 0; j < M; ++j)
        B(i, j) = static_cast<double>(emit[static_cast<std::size_t>(i) * M + j]) /
                  static_cast<double>(visits_all[i]);
    }
  }
  return validate_params(P, B);
}

std::vector<ProbVector> filter_posteriors(const HmmParams& params, int x_start,
                                          std::span<const int> observations) {
  if (observations.empty()) throw TooShort("need at least one observation");
  if (x_start < 0 || x_start >= params.n) throw IndexOutOfRange("x_start out of range");
  const int n = params.n;

  std::vector<ProbVector> out;
  out.reserve(observations.size());
  ProbVector p(n, 0.0);
  p[x_start] = 1.0;
  ProbVector next(n, 0.0);
  for (std::size_t k = 0; k < observations.size(); ++k) {
    int y = observations[k];
    if (y < 0 || y >= params.M) throw IndexOutOfRange("observation out of range");
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += params.P(j, i) * p[j];
      next[i] = params.B(i, y) * acc;
      norm += next[i];
    }
    if (norm <= 0.0)
      throw DegenerateLikelihood("observation " + std::to_string(k + 1) +
                                 " impossible under the parameters");
    for (int i = 0; i < n; ++i) p[i] = next[i] / norm;
    out.push_back(p);
  }
  return out;
}

std::vector<ProbVector> brute_force_posterior(const HmmParams& params, int x_start,
                                              std::span<const int> observations) {
  const int m = static_cast<int>(observations.size());
  if (m < 1) throw TooShort("need at least one observation");
  if (m > 10) throw PathExplosion("path enumeration limited to 10 steps");
  if (x_start < 0 || x_start >= params.n) throw IndexOutOfRange("x_start out of range");
  const int n = params.n;

  std::vector<ProbVector> out;
  for (int k = 1; k <= m; ++k) {
    // Sum path probabilities prod_t P(x_{t-1}, x_t) B(x_t, y_t) over all n^k
    // paths, marginalizing on the endpoint.
    ProbVector marginal(n, 0.0);
    std::vector<int> path(k, 0);
    while (true) {
      double w = 1.0;
      int prev = x_start;
      for (int t = 0; t < k; ++t) {
        int y = observations[t];
        if (y < 0 || y >= params.M) throw IndexOutOfRange("observation out of range");
        w *= params.P(prev, path[t]) * params.B(path[t], y);
        prev = path[t];
      }
      marginal[path[k - 1]] += w;

      int pos = k - 1;
      while (pos >= 0 && path[pos] == n - 1) path[pos--] = 0;
      if (pos < 0) break;
      ++path[pos];
    }
    double total = 0.0;
    for (double v : marginal) total += v;
    if (total <= 0.0)
      throw DegenerateLikelihood("observation prefix of length " + std::to_string(k) +
                                 " impossible under the parameters");
    for (double& v : marginal) v /= total;
    out.push_back(std::move(marginal));
  }
  return out;
}

}  // namespace hmmconf
