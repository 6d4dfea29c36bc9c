#include "hbvote/voting_node.hpp"

#include <charconv>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"

namespace hbvote {

VotingNode::VotingNode(std::string node_id, std::string ballot_box_id, std::string election_id, Difficulty difficulty,
                       std::uint64_t mining_budget)
    : node_id_(std::move(node_id)),
      ballot_box_id_(std::move(ballot_box_id)),
      difficulty_(std::move(difficulty)),
      mining_budget_(mining_budget),
      chain_(std::move(election_id), 0) {}

Receipt VotingNode::cast_vote(Registry& registry, const Credentials& credentials, std::string_view candidate_id) {
  if (down_) throw Error(Errc::CenterDown, node_id_ + " is out of service");
  if (paused_) throw Error(Errc::VotingPaused, node_id_ + " is synchronizing");

  AuthToken token = registry.validate(credentials, node_id_);
  VoteBlock block;
  try {
    if (!registry.candidate_registry().allows(ballot_box_id_, candidate_id)) {
      throw Error(Errc::InvalidCandidate, std::string(candidate_id) + " is not on the ballot of " + ballot_box_id_);
    }
    block = VoteBlock{chain_.election_id(), ballot_box_id_, std::string(candidate_id), chain_.tip_hash(), {}};
    block.nonce = mine(block, difficulty_.at(0), mining_budget_);
    // Same checks as append(), without giving up the chain on failure.
    if (auto issue = check_block(block, chain_.election_id(), difficulty_)) throw Error(issue->code, issue->detail);
    chain_.push_unchecked(block);
  } catch (...) {
    registry.release(token);
    throw;
  }
  // The voted flag is set only once the block is on the chain.
  registry.mark_voted(token);
  return Receipt{hash_of(block), chain_.size() - 1};
}

std::vector<VoteBlock> VotingNode::pending_votes() const {
  const auto& votes = chain_.votes();
  auto first = std::min<std::size_t>(accepted_count_, votes.size());
  return {votes.begin() + static_cast<std::ptrdiff_t>(first), votes.end()};
}

Lotb VotingNode::pending_batch() const { return Lotb{pending_votes(), {}}; }

void VotingNode::begin_sync(std::uint64_t round) {
  sync_round_ = round;
  set_paused(true);
}

void VotingNode::apply_ack(const SyncAck& ack) {
  if (!sync_round_ || ack.round != *sync_round_) {
    throw Error(Errc::StaleAck, "ack for round " + std::to_string(ack.round) + " at " + node_id_);
  }
  if (ack.flag == AckFlag::Decline) return;
  if (accepted_count_ + ack.accepted_size > chain_.votes().size()) {
    throw Error(Errc::StaleAck, "ack accepts more votes than " + node_id_ + " holds");
  }
  accepted_count_ += ack.accepted_size;
  if (count_file_) write_file_atomic(*count_file_, std::to_string(accepted_count_) + "\n");
}

void VotingNode::persist_to(std::filesystem::path path) {
  count_file_ = std::move(path);
  write_file_atomic(*count_file_, std::to_string(accepted_count_) + "\n");
}

std::uint64_t VotingNode::load_accepted_count(const std::filesystem::path& path) {
  auto text = read_file(path);
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end == text.data() || std::string_view(end, text.data() + text.size() - end) != "\n") {
    throw ParseError(1, "accepted-count file must hold one decimal integer and a newline");
  }
  return value;
}

}  // namespace hbvote
