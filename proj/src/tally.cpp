#include "hbvote/tally.hpp"

#include "hbvote/error.hpp"

namespace hbvote {

namespace {

void unwrap(const Lotb& lotb, std::vector<VoteBlock>& out) {
  out.insert(out.end(), lotb.votes.begin(), lotb.votes.end());
  for (const auto& b : lotb.batches) unwrap(b.lotb, out);
}

}  // namespace

void flatten_unchecked(const Chain& chain, std::vector<VoteBlock>& out) { unwrap(chain.body(), out); }

std::vector<VoteBlock> flatten(const Chain& top, const Difficulty& difficulty) {
  auto verdict = validate_chain(top, difficulty);
  if (!verdict.ok()) {
    throw Error(Errc::InvalidChain, "block " + std::to_string(verdict.failure->index) + ": " +
                                        std::string(errc_name(verdict.failure->reason)) + " " + verdict.failure->detail);
  }
  std::vector<VoteBlock> out;
  flatten_unchecked(top, out);
  return out;
}

TallyResult tally_from_counts(const std::map<std::string, std::map<std::string, std::uint64_t>>& counts,
                              const RegionMap& regions, const CandidateRegistry& candidates) {
  TallyResult out;
  for (const auto& [box, region] : regions) {
    auto& rows = out.regions[region].counts;
    for (const auto& c : candidates.candidates_for(box)) rows.try_emplace(c.id, 0);
  }
  for (const auto& [region, row] : counts) {
    auto& rows = out.regions[region].counts;
    for (const auto& [candidate, n] : row) {
      rows[candidate] += n;
      out.total += n;
    }
  }
  for (auto& [region, rt] : out.regions) {
    std::uint64_t best = 0;
    bool any = false;
    for (const auto& [candidate, n] : rt.counts) {
      if (candidate == kBlankCandidate) continue;
      if (!any || n > best) {
        best = n;
        rt.winners.clear();
        any = true;
      }
      if (n == best) rt.winners.push_back(candidate);
    }
  }
  return out;
}

TallyResult tally(std::span<const VoteBlock> votes, const RegionMap& regions, const CandidateRegistry& candidates) {
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  for (const auto& v : votes) {
    auto region = regions.find(v.ballot_box_id);
    if (region == regions.end()) throw Error(Errc::UnknownBallotBox, v.ballot_box_id);
    if (!candidates.allows(v.ballot_box_id, v.candidate_id)) {
      throw Error(Errc::UnknownCandidate, v.candidate_id + " is not registered for " + v.ballot_box_id);
    }
    ++counts[region->second][v.candidate_id];
  }
  return tally_from_counts(counts, regions, candidates);
}

}  // namespace hbvote
