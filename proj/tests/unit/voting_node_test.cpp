#include <gtest/gtest.h>

#include <functional>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "hbvote/voting_node.hpp"
#include "support.hpp"

using namespace hbvote;
using hbvote::testing::TempDir;

namespace {

struct Station {
  Registry reg{"salt", [] {
                 CandidateRegistry c;
                 c.add_ballot_box("box-000", {{"A", "A"}, {"B", "B"}});
                 return c;
               }()};
  VotingNode node{"center-000", "box-000", "E1", Difficulty::level0(6)};
  std::vector<Credentials> voters;

  explicit Station(int n = 12) {
    reg.add_station("center-000", "box-000");
    for (int i = 0; i < n; ++i) {
      Credentials c{"voter-" + std::to_string(i), "pw-" + std::to_string(i)};
      reg.add_voter(c.voter_id, c.password, "box-000");
      voters.push_back(c);
    }
  }

  void cast(int first, int count) {
    for (int i = first; i < first + count; ++i) node.cast_vote(reg, voters[i], i % 2 ? "A" : "B");
  }

  void accept(std::uint64_t round, std::size_t size) {
    node.begin_sync(round);
    node.apply_ack({round, AckFlag::Accept, size});
    node.end_sync();
  }
};

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::Io;
}

}  // namespace

TEST(VotingNode, CastGrowsTheChainAndFlagsTheVoter) {
  Station s;
  auto receipt = s.node.cast_vote(s.reg, s.voters[0], "A");
  EXPECT_EQ(s.node.chain().size(), 2u);
  EXPECT_EQ(receipt.chain_index, 1u);
  EXPECT_EQ(receipt.block_hash, s.node.chain().tip_hash());
  EXPECT_TRUE(s.reg.voter(s.voters[0].voter_id)->voted);
  EXPECT_TRUE(validate_chain(s.node.chain(), Difficulty::level0(6)).ok());
  EXPECT_TRUE(matches_pattern(receipt.block_hash, {6}));
}

TEST(VotingNode, RepeatVoterLeavesChainUnchanged) {
  Station s;
  s.node.cast_vote(s.reg, s.voters[0], "A");
  EXPECT_EQ(code_of([&] { s.node.cast_vote(s.reg, s.voters[0], "B"); }), Errc::AlreadyVoted);
  EXPECT_EQ(s.node.chain().size(), 2u);
}

TEST(VotingNode, PausedAndDownRejectCasts) {
  Station s;
  s.node.set_paused(true);
  EXPECT_EQ(code_of([&] { s.node.cast_vote(s.reg, s.voters[0], "A"); }), Errc::VotingPaused);
  EXPECT_EQ(s.node.chain().size(), 1u);
  EXPECT_FALSE(s.reg.voter(s.voters[0].voter_id)->voted);
  s.node.set_paused(false);
  s.node.cast_vote(s.reg, s.voters[0], "A");

  s.node.set_down(true);
  EXPECT_EQ(code_of([&] { s.node.cast_vote(s.reg, s.voters[1], "A"); }), Errc::CenterDown);
}

TEST(VotingNode, InvalidCandidateReleasesTheToken) {
  Station s;
  EXPECT_EQ(code_of([&] { s.node.cast_vote(s.reg, s.voters[0], "Z"); }), Errc::InvalidCandidate);
  EXPECT_EQ(s.node.chain().size(), 1u);
  s.node.cast_vote(s.reg, s.voters[0], "BLANK");
  EXPECT_EQ(s.node.chain().votes().back().candidate_id, "BLANK");
}

TEST(VotingNode, MiningBudgetFailureKeepsTheVoterEligible) {
  Station s;
  VotingNode hard("center-000", "box-000", "E1", Difficulty::level0(40), 16);
  EXPECT_EQ(code_of([&] { hard.cast_vote(s.reg, s.voters[0], "A"); }), Errc::MiningBudgetExceeded);
  EXPECT_EQ(hard.chain().size(), 1u);
  s.node.cast_vote(s.reg, s.voters[0], "A");
}

TEST(VotingNode, PendingBatchFollowsAcceptedCount) {
  Station s;
  s.cast(0, 5);
  s.accept(0, 3);
  auto pending = s.node.pending_batch();
  ASSERT_EQ(pending.votes.size(), 2u);
  EXPECT_EQ(pending.votes[0], s.node.chain().votes()[3]);
  EXPECT_EQ(pending.votes[1], s.node.chain().votes()[4]);

  s.accept(1, 2);
  EXPECT_TRUE(s.node.pending_batch().empty());
  s.cast(5, 2);
  EXPECT_EQ(s.node.pending_votes().size(), 2u);
  EXPECT_EQ(s.node.pending_votes()[0], s.node.chain().votes()[5]);
}

TEST(VotingNode, AckAccountingAndStaleness) {
  Station s;
  s.cast(0, 9);
  s.accept(0, 7);
  EXPECT_EQ(s.node.accepted_count(), 7u);

  const auto before = s.node.pending_batch();
  s.node.begin_sync(1);
  EXPECT_TRUE(s.node.paused());
  s.node.apply_ack({1, AckFlag::Decline, 0});
  EXPECT_EQ(s.node.accepted_count(), 7u);
  EXPECT_EQ(s.node.pending_batch(), before);

  s.node.begin_sync(5);
  EXPECT_EQ(code_of([&] { s.node.apply_ack({3, AckFlag::Accept, 1}); }), Errc::StaleAck);
  EXPECT_EQ(code_of([&] { s.node.apply_ack({5, AckFlag::Accept, 3}); }), Errc::StaleAck);
  s.node.end_sync();
  EXPECT_FALSE(s.node.paused());
  EXPECT_EQ(s.node.accepted_count(), 7u);
}

TEST(VotingNode, AckBeforeAnyRoundIsStale) {
  Station s;
  EXPECT_EQ(code_of([&] { s.node.apply_ack({0, AckFlag::Accept, 0}); }), Errc::StaleAck);
}

TEST(VotingNode, PersistsTheAcceptedCount) {
  TempDir dir("node");
  Station s;
  s.node.persist_to(dir / "center-000.count");
  EXPECT_EQ(read_file(dir / "center-000.count"), "0\n");
  s.cast(0, 4);
  s.accept(0, 4);
  EXPECT_EQ(read_file(dir / "center-000.count"), "4\n");
  EXPECT_EQ(VotingNode::load_accepted_count(dir / "center-000.count"), 4u);

  write_file_atomic(dir / "bad.count", "4");
  EXPECT_THROW(VotingNode::load_accepted_count(dir / "bad.count"), ParseError);
}
