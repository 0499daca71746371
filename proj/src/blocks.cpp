#include "hmmconf/blocks.hpp"

#include <map>
#include <string>
#include <utility>

#include "hmmconf/errors.hpp"

namespace hmmconf {

std::size_t BlockPartition::total_length() const {
  std::size_t len = prefix.size();
  for (const auto& b : blocks) len += b.size();
  return len;
}

BlockPartition partition_blocks(const AugmentedSequence& seq) {
  if (seq.empty()) throw TooShort("cannot partition an empty sequence");

  BlockPartition out;
  out.anchor = seq.back();

  std::size_t first = 0;
  while (first < seq.size() && seq[first] != out.anchor) ++first;
  out.prefix.assign(seq.begin(), seq.begin() + first);

  std::size_t start = first;  // always an anchor occurrence
  for (std::size_t t = first + 1; t <= seq.size(); ++t) {
    if (t == seq.size() || seq[t] == out.anchor) {
      out.blocks.emplace_back(seq.begin() + start, seq.begin() + t);
      start = t;
    }
  }
  return out;
}

AugmentedSequence apply_permutation(const BlockPartition& partition,
                                    std::span<const int> perm) {
  const std::size_t d = partition.blocks.size();
  if (perm.size() != d)
    throw LengthMismatch("permutation length " + std::to_string(perm.size()) +
                         " != block count " + std::to_string(d));
  AugmentedSequence out;
  out.reserve(partition.total_length());
  out.insert(out.end(), partition.prefix.begin(), partition.prefix.end());
  for (int idx : perm) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= d)
      throw IndexOutOfRange("block index out of range in permutation");
    const auto& block = partition.blocks[idx];
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

bool check_partial_exchangeability(const AugmentedSequence& a,
                                   const AugmentedSequence& b) {
  if (a.size() != b.size())
    throw LengthMismatch("sequences must have equal lengths");
  if (a.empty()) return true;
  if (a.front() != b.front()) return false;

  std::map<std::pair<StateObs, StateObs>, long> counts;
  for (std::size_t t = 0; t + 1 < a.size(); ++t) counts[{a[t], a[t + 1]}] += 1;
  for (std::size_t t = 0; t + 1 < b.size(); ++t) {
    auto it = counts.find({b[t], b[t + 1]});
    if (it == counts.end() || it->second == 0) return false;
    it->second -= 1;
  }
  for (const auto& [key, c] : counts)
    if (c != 0) return false;
  return true;
}

}  // namespace hmmconf
