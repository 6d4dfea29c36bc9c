#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hbvote/chain.hpp"
#include "hbvote/config.hpp"
#include "hbvote/registry.hpp"

namespace hbvote {

struct RegionTally {
  /// Every candidate on a ballot of the region, BLANK included.
  std::map<std::string, std::uint64_t> counts;
  /// One entry for an outright winner, several for a tie. BLANK never wins.
  std::vector<std::string> winners;

  bool tie() const { return winners.size() > 1; }
  bool operator==(const RegionTally&) const = default;
};

struct TallyResult {
  std::map<std::string, RegionTally> regions;
  std::uint64_t total = 0;

  bool operator==(const TallyResult&) const = default;
};

/// Validates `top` and unwraps every lotb down to the votes, in
/// chain-then-lotb order. Throws InvalidChain.
std::vector<VoteBlock> flatten(const Chain& top, const Difficulty& difficulty);

/// Same walk without validation.
void flatten_unchecked(const Chain& chain, std::vector<VoteBlock>& out);

/// Throws UnknownBallotBox / UnknownCandidate.
TallyResult tally(std::span<const VoteBlock> votes, const RegionMap& regions, const CandidateRegistry& candidates);

/// Builds a result from raw counts (region -> candidate -> count), filling in
/// zero rows and winners the same way tally() does.
TallyResult tally_from_counts(const std::map<std::string, std::map<std::string, std::uint64_t>>& counts,
                              const RegionMap& regions, const CandidateRegistry& candidates);

}  // namespace hbvote
