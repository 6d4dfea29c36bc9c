#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbvote/chain.hpp"
#include "hbvote/registry.hpp"

namespace hbvote {

enum class AckFlag { Accept, Decline };

/// Downward answer of a sync round. accepted_size is 0 on decline.
struct SyncAck {
  std::uint64_t round = 0;
  AckFlag flag = AckFlag::Decline;
  std::size_t accepted_size = 0;

  bool operator==(const SyncAck&) const = default;
};

/// What a sync round needs from any node below it: voting centers at level 0
/// and cluster chains acting as sources for the level above.
class LowerNode {
 public:
  virtual ~LowerNode() = default;

  virtual const std::string& chain_id() const = 0;
  /// Blocks after the accepted count, in chain order.
  virtual Lotb pending_batch() const = 0;
  virtual std::uint64_t accepted_count() const = 0;
  virtual void begin_sync(std::uint64_t round) = 0;
  virtual void apply_ack(const SyncAck& ack) = 0;
  virtual void end_sync() = 0;
};

struct Receipt {
  HashDigest block_hash;
  std::size_t chain_index = 0;
};

/// A level-0 voting center serving exactly one ballot box.
class VotingNode final : public LowerNode {
 public:
  VotingNode(std::string node_id, std::string ballot_box_id, std::string election_id, Difficulty difficulty,
             std::uint64_t mining_budget = kDefaultMiningBudget);

  const std::string& node_id() const { return node_id_; }
  const std::string& ballot_box_id() const { return ballot_box_id_; }
  const std::string& chain_id() const override { return node_id_; }

  /// Authenticates, mines and appends one vote, then flags the voter.
  Receipt cast_vote(Registry& registry, const Credentials& credentials, std::string_view candidate_id);

  std::vector<VoteBlock> pending_votes() const;
  Lotb pending_batch() const override;

  std::uint64_t accepted_count() const override { return accepted_count_; }
  void begin_sync(std::uint64_t round) override;
  void apply_ack(const SyncAck& ack) override;
  void end_sync() override { set_paused(false); }

  void set_paused(bool flag) { paused_ = flag; }
  bool paused() const { return paused_; }
  void set_down(bool flag) { down_ = flag; }
  bool down() const { return down_; }
  std::optional<std::uint64_t> sync_round() const { return sync_round_; }

  const Chain& chain() const { return chain_; }
  /// Raw chain access for fault injection.
  Chain& mutable_chain() { return chain_; }

  /// Persist the accepted count to `path` on every accept.
  void persist_to(std::filesystem::path path);
  static std::uint64_t load_accepted_count(const std::filesystem::path& path);

 private:
  std::string node_id_;
  std::string ballot_box_id_;
  Difficulty difficulty_;
  std::uint64_t mining_budget_;
  Chain chain_;
  std::uint64_t accepted_count_ = 0;
  bool paused_ = false;
  bool down_ = false;
  std::optional<std::uint64_t> sync_round_;
  std::optional<std::filesystem::path> count_file_;
};

}  // namespace hbvote
