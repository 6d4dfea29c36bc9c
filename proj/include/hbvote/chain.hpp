#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hbvote/digest.hpp"
#include "hbvote/error.hpp"

namespace hbvote {

inline constexpr std::string_view kBlankCandidate = "BLANK";
inline constexpr std::uint64_t kDefaultMiningBudget = std::uint64_t{1} << 26;

/// Number of leading zero bits a block digest must carry.
struct DifficultyPattern {
  std::uint32_t zero_bits = 0;

  auto operator<=>(const DifficultyPattern&) const = default;
};

/// Per-level difficulty. Levels past the end of the list need no mining.
class Difficulty {
 public:
  Difficulty() = default;
  explicit Difficulty(std::vector<std::uint32_t> bits_per_level);

  static Difficulty level0(std::uint32_t zero_bits) { return Difficulty({zero_bits}); }

  DifficultyPattern at(std::uint32_t level) const {
    return level < bits_.size() ? DifficultyPattern{bits_[level]} : DifficultyPattern{};
  }
  const std::vector<std::uint32_t>& bits() const { return bits_; }

 private:
  std::vector<std::uint32_t> bits_;
};

struct GenesisBlock {
  std::string election_id;
  std::uint32_t level = 0;

  bool operator==(const GenesisBlock&) const = default;
};

/// Level-0 block: exactly one vote, no voter identity.
struct VoteBlock {
  std::string election_id;
  std::string ballot_box_id;
  std::string candidate_id;
  HashDigest prev_hash;
  std::string nonce;

  bool operator==(const VoteBlock&) const = default;
};

struct BatchBlock;

/// "List of the blocks": the child payload of a batch block. Level-1 batches
/// hold votes, higher levels hold batches of the level below. Only one of the
/// two vectors is populated for a given level.
struct Lotb {
  std::vector<VoteBlock> votes;
  std::vector<BatchBlock> batches;

  std::size_t size() const { return votes.size() + batches.size(); }
  bool empty() const { return votes.empty() && batches.empty(); }
};

bool operator==(const Lotb& a, const Lotb& b);

struct BatchBlock {
  std::string election_id;
  std::uint32_t level = 1;
  std::uint64_t round = 0;
  HashDigest prev_hash;
  Lotb lotb;
  std::optional<std::string> nonce;

  bool operator==(const BatchBlock&) const = default;
};

// Hash pre-images. Field values may not contain '|' or ','.
std::string canonical_bytes(const GenesisBlock& block);
std::string canonical_bytes(const VoteBlock& block);
std::string canonical_bytes(const BatchBlock& block);

HashDigest hash_of(const GenesisBlock& block);
HashDigest hash_of(const VoteBlock& block);
HashDigest hash_of(const BatchBlock& block);

bool matches_pattern(const HashDigest& digest, DifficultyPattern pattern);

/// Sequential nonce search from 0. Returns the smallest decimal nonce whose
/// digest matches; throws MiningBudgetExceeded after `budget` attempts.
std::string mine(const VoteBlock& draft, DifficultyPattern pattern,
                 std::uint64_t budget = kDefaultMiningBudget);
std::string mine(const BatchBlock& draft, DifficultyPattern pattern,
                 std::uint64_t budget = kDefaultMiningBudget);

/// Comma-joined hex digests of the children, in order.
std::string joined_child_hashes(const Lotb& lotb);

/// An ordered chain of blocks beginning with a synthetic genesis block.
/// Index 0 is the genesis; index i >= 1 is body()[i - 1].
class Chain {
 public:
  Chain(std::string election_id, std::uint32_t level);

  const std::string& election_id() const { return genesis_.election_id; }
  std::uint32_t level() const { return genesis_.level; }
  const GenesisBlock& genesis() const { return genesis_; }

  std::size_t size() const { return 1 + body_.size(); }
  const Lotb& body() const { return body_; }
  const std::vector<VoteBlock>& votes() const { return body_.votes; }
  const std::vector<BatchBlock>& batches() const { return body_.batches; }

  HashDigest hash_at(std::size_t index) const;
  HashDigest tip_hash() const { return hash_at(size() - 1); }

  /// Appends without any check. Used by append() after validation, by the
  /// chain-file loader and by quorum commits.
  void push_unchecked(VoteBlock block) { body_.votes.push_back(std::move(block)); }
  void push_unchecked(BatchBlock block) { body_.batches.push_back(std::move(block)); }

  /// Raw access for fault injection; the chain may become invalid.
  Lotb& mutable_body() { return body_; }

  bool operator==(const Chain&) const = default;

 private:
  GenesisBlock genesis_;
  Lotb body_;
};

Chain append(Chain chain, VoteBlock block, const Difficulty& difficulty);
Chain append(Chain chain, BatchBlock block, const Difficulty& difficulty);

struct Issue {
  Errc code;
  std::string detail;
};

/// Structural checks on one block in isolation: delimiters, election id,
/// level, nonce pattern, and recursively every lotb child.
std::optional<Issue> check_block(const VoteBlock& block, std::string_view election_id,
                                 const Difficulty& difficulty);
std::optional<Issue> check_block(const BatchBlock& block, std::string_view election_id,
                                 std::uint32_t level, const Difficulty& difficulty);

/// Tracks where every lower chain has reached, so that lotb children can be
/// checked to continue their source chains exactly once and in order.
/// Votes link per ballot box; batch children link to any current tip of
/// their level or to the shared genesis of that level.
class ContinuityTracker {
 public:
  explicit ContinuityTracker(std::string election_id);

  /// Checks the children of `block` and, when all link, records them.
  /// On failure the tracker is left unchanged.
  std::optional<Issue> admit(const BatchBlock& block);

 private:
  struct State {
    std::unordered_map<std::string, HashDigest> box_tips;
    std::unordered_map<std::uint32_t, std::unordered_multiset<HashDigest>> batch_tips;
  };
  std::optional<Issue> walk(const Lotb& lotb, std::uint32_t child_level, State& state) const;
  const HashDigest& genesis_hash(std::uint32_t level) const;

  std::string election_id_;
  mutable std::unordered_map<std::uint32_t, HashDigest> genesis_hashes_;
  State state_;
};

struct ValidationFailure {
  std::size_t index;
  Errc reason;
  std::string detail;
};

struct ChainVerdict {
  std::optional<ValidationFailure> failure;

  bool ok() const { return !failure.has_value(); }
};

/// Validates every link, nonce pattern and lotb child (recursively and for
/// continuity). With an anchor, the tip digest must also equal it.
ChainVerdict validate_chain(const Chain& chain, const Difficulty& difficulty,
                            const std::optional<HashDigest>& anchor = std::nullopt);

}  // namespace hbvote
