#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbvote/chain.hpp"
#include "hbvote/voting_node.hpp"

namespace hbvote {

struct BatchSubmission {
  std::string source_chain_id;
  std::uint64_t round = 0;
  Lotb blocks;
  HashDigest batch_hash;
};

/// SHA-256 over the comma-joined hex digests of the blocks.
HashDigest batch_hash_of(const Lotb& blocks);
BatchSubmission make_submission(std::string source_chain_id, std::uint64_t round, Lotb blocks);

struct DelegateSet {
  std::vector<std::string> delegates;
  std::uint32_t quorum_num = 2;
  std::uint32_t quorum_den = 3;

  const std::string& proposer(std::uint64_t round) const { return delegates.at(round % delegates.size()); }
  /// Strictly more than quorum_num/quorum_den of the delegates.
  bool quorum_reached(std::size_t approvals) const {
    return std::uint64_t{approvals} * quorum_den > std::uint64_t{quorum_num} * delegates.size();
  }
};

enum class RoundState { Collecting, Deciding, Acked };

struct SyncRound {
  std::uint64_t round = 0;
  std::uint32_t lower_level = 0;
  std::uint32_t upper_level = 1;
  RoundState state = RoundState::Collecting;
};

struct Consistency {
  bool consistent = false;
  /// Agreed content per source, ordered by source chain id.
  std::map<std::string, Lotb> agreed;
  std::string reason;
};

/// Unanimity: every expected source reported, and every copy a source sent
/// carries the same, recomputable batch hash.
Consistency check_consistency(std::span<const BatchSubmission> submissions,
                              std::span<const std::string> expected_sources);

enum class DelegateBehavior {
  Honest,
  Colluding,  // approves any proposal
  Refusing,   // disapproves any proposal
};

struct FinalizeOutcome {
  bool finalized = false;
  std::size_t approvals = 0;
  std::string reason;
};

/// A chain at level >= 1, replicated among its delegates. Replicas only ever
/// append the same finalized block, so one copy is stored.
class UpperChain final : public LowerNode {
 public:
  UpperChain(std::string chain_id, std::string election_id, std::uint32_t level, DelegateSet delegates,
             Difficulty difficulty, std::uint64_t mining_budget = kDefaultMiningBudget);

  const std::string& chain_id() const override { return id_; }
  const Chain& chain() const { return chain_; }
  const DelegateSet& delegates() const { return delegates_; }
  std::uint32_t level() const { return chain_.level(); }
  const Difficulty& difficulty() const { return difficulty_; }

  void set_behaviors(std::vector<DelegateBehavior> behaviors) { behaviors_ = std::move(behaviors); }

  /// Opens the next round number. Throws RoundAlreadyOpen.
  SyncRound& open_round();
  const std::optional<SyncRound>& current_round() const { return open_; }
  void close_round();
  std::uint64_t next_round() const { return next_round_; }

  /// Builds the batch block for `round`; lotb is the agreed batches in
  /// source order. Throws NotProposer.
  BatchBlock propose_block(std::string_view proposer, std::uint64_t round,
                           const std::map<std::string, Lotb>& agreed) const;

  /// Why an honest delegate would refuse `proposal`, if it would.
  std::optional<Issue> review(const BatchBlock& proposal) const;

  /// Collects one vote per delegate; on a strict quorum the block is
  /// appended as proposed.
  FinalizeOutcome dpos_finalize(const BatchBlock& proposal);

  // As a source for the level above.
  Lotb pending_batch() const override;
  std::uint64_t accepted_count() const override { return accepted_count_; }
  void begin_sync(std::uint64_t round) override { sync_round_ = round; }
  void apply_ack(const SyncAck& ack) override;
  void end_sync() override {}

  Chain& mutable_chain() { return chain_; }

 private:
  std::string id_;
  Chain chain_;
  DelegateSet delegates_;
  Difficulty difficulty_;
  std::uint64_t mining_budget_;
  std::vector<DelegateBehavior> behaviors_;
  ContinuityTracker continuity_;
  std::optional<SyncRound> open_;
  std::uint64_t next_round_ = 0;
  std::uint64_t accepted_count_ = 0;
  std::optional<std::uint64_t> sync_round_;
};

/// Opens the next round on `upper` and pauses every node below it.
SyncRound& open_round(UpperChain& upper, std::span<LowerNode* const> lowers);

/// Message delivery between levels. The default delivers every copy intact.
class Transport {
 public:
  virtual ~Transport() = default;
  /// The copy of `submission` that reaches delegate `delegate_index`, or
  /// nothing if it is lost.
  virtual std::optional<BatchSubmission> deliver(const BatchSubmission& submission, std::size_t delegate_index);
};

struct SyncOptions {
  std::uint32_t retry_cap = 10;
  std::uint64_t latency_ms = 100;
  bool resume = true;
};

struct AttemptLog {
  std::uint64_t round = 0;
  std::uint32_t attempt = 0;
  AckFlag flag = AckFlag::Decline;
  std::vector<std::pair<std::string, std::size_t>> batch_sizes;
  std::size_t approvals = 0;
  std::uint64_t duration_ms = 0;
  std::string reason;
};

enum class CycleStatus { Accepted, RetryCapExceeded };

struct CycleOutcome {
  CycleStatus status = CycleStatus::Accepted;
  std::vector<AttemptLog> attempts;
  std::map<std::string, SyncAck> acks;
  std::uint64_t duration_ms = 0;
  std::size_t committed = 0;
};

/// open -> pause -> collect -> consistency -> propose -> finalize -> ack,
/// repeated with fresh round numbers and the same batches until accepted or
/// `retry_cap` consecutive declines.
CycleOutcome run_sync_cycle(UpperChain& upper, std::span<LowerNode* const> lowers, Transport& transport,
                            const SyncOptions& options);

}  // namespace hbvote
