#include "hmmconf/permutations.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "hmmconf/errors.hpp"
#include "hmmconf/rng.hpp"

namespace hmmconf {

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  using u128 = unsigned __int128;
  u128 prod = u128(a) * u128(b);
  if (prod > u128(kUnlimited - 1)) return kUnlimited - 1;  // keep below "unlimited"
  return static_cast<std::uint64_t>(prod);
}

// Permutation whose last m+1 slots hold `selection` and whose leading slots
// hold the remaining blocks in their original relative order.
std::vector<int> selection_to_perm(int d, std::span<const int> selection) {
  std::vector<char> used(d, 0);
  for (int idx : selection) used[idx] = 1;
  std::vector<int> perm;
  perm.reserve(d);
  for (int i = 0; i < d; ++i)
    if (!used[i]) perm.push_back(i);
  perm.insert(perm.end(), selection.begin(), selection.end());
  return perm;
}

bool is_identity_selection(int d, std::span<const int> selection) {
  const int k = static_cast<int>(selection.size());
  for (int i = 0; i < k; ++i)
    if (selection[i] != d - k + i) return false;
  return true;
}

void enumerate_selections(int d, int slots, std::vector<int>& selection,
                          std::vector<char>& used, PermutationSet& out) {
  if (static_cast<int>(selection.size()) == slots) {
    if (is_identity_selection(d, selection)) out.identity_index = out.perms.size();
    out.perms.push_back(selection_to_perm(d, selection));
    return;
  }
  for (int a = 0; a < d; ++a) {
    if (used[a]) continue;
    used[a] = 1;
    selection.push_back(a);
    enumerate_selections(d, slots, selection, used, out);
    selection.pop_back();
    used[a] = 0;
  }
}

}  // namespace

std::uint64_t tail_arrangement_count(int d, int m) {
  if (d < 1 || m < 1) throw Error("block count and horizon must be >= 1");
  std::uint64_t count = 1;
  if (d <= m + 1) {
    for (int k = 2; k <= d; ++k) count = saturating_mul(count, k);
  } else {
    for (int k = d - m; k <= d; ++k) count = saturating_mul(count, k);
  }
  return count;
}

PermutationSet enumerate_tail_arrangements(int d, int m, std::uint64_t budget,
                                           std::uint64_t subsample_seed) {
  if (d < 1 || m < 1) throw Error("block count and horizon must be >= 1");
  if (budget < 1) throw Error("permutation budget must be >= 1");

  PermutationSet out;
  out.d = d;
  out.full_cardinality = tail_arrangement_count(d, m);
  const bool full_orders = d <= m + 1;
  const int slots = full_orders ? d : m + 1;

  if (out.full_cardinality <= budget) {
    if (full_orders) {
      // All d! block orders, lexicographic; the identity comes first.
      std::vector<int> perm(d);
      std::iota(perm.begin(), perm.end(), 0);
      out.identity_index = 0;
      do {
        out.perms.push_back(perm);
      } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
      std::vector<int> selection;
      std::vector<char> used(d, 0);
      enumerate_selections(d, slots, selection, used, out);
    }
    return out;
  }

  // Subsample: keep the identity, then draw distinct tuples uniformly.
  out.approximate = true;
  Rng rng(subsample_seed);
  std::set<std::vector<int>> seen;

  std::vector<int> identity(slots);
  std::iota(identity.begin(), identity.end(), d - slots);
  seen.insert(identity);
  out.identity_index = 0;
  out.perms.push_back(selection_to_perm(d, identity));

  std::vector<int> scratch(d);
  while (out.perms.size() < budget) {
    std::iota(scratch.begin(), scratch.end(), 0);
    for (int i = 0; i < slots; ++i) {
      int j = i + rng.uniform_index(d - i);
      std::swap(scratch[i], scratch[j]);
    }
    std::vector<int> tuple(scratch.begin(), scratch.begin() + slots);
    if (!seen.insert(tuple).second) continue;
    out.perms.push_back(selection_to_perm(d, tuple));
  }
  return out;
}

}  // namespace hmmconf
