#include "hbvote/sync.hpp"

#include "hbvote/error.hpp"

namespace hbvote {

HashDigest batch_hash_of(const Lotb& blocks) { return sha256(joined_child_hashes(blocks)); }

BatchSubmission make_submission(std::string source_chain_id, std::uint64_t round, Lotb blocks) {
  BatchSubmission s{std::move(source_chain_id), round, std::move(blocks), {}};
  s.batch_hash = batch_hash_of(s.blocks);
  return s;
}

Consistency check_consistency(std::span<const BatchSubmission> submissions,
                              std::span<const std::string> expected_sources) {
  Consistency out;
  std::map<std::string, const BatchSubmission*> first_copy;
  for (const auto& s : submissions) {
    HashDigest recomputed;
    try {
      recomputed = batch_hash_of(s.blocks);
    } catch (const Error& e) {
      out.reason = s.source_chain_id + ": " + e.what();
      return out;
    }
    if (recomputed != s.batch_hash) {
      out.reason = s.source_chain_id + ": batch hash does not match its blocks";
      return out;
    }
    auto [it, fresh] = first_copy.emplace(s.source_chain_id, &s);
    if (!fresh && it->second->batch_hash != s.batch_hash) {
      out.reason = s.source_chain_id + ": copies disagree";
      return out;
    }
  }
  for (const auto& source : expected_sources) {
    if (first_copy.count(source) == 0) {
      out.reason = source + ": no submission before timeout";
      return out;
    }
  }
  for (const auto& [source, copy] : first_copy) out.agreed.emplace(source, copy->blocks);
  out.consistent = true;
  return out;
}

// ---------------------------------------------------------------------------

UpperChain::UpperChain(std::string chain_id, std::string election_id, std::uint32_t level, DelegateSet delegates,
                       Difficulty difficulty, std::uint64_t mining_budget)
    : id_(std::move(chain_id)),
      chain_(election_id, level),
      delegates_(std::move(delegates)),
      difficulty_(std::move(difficulty)),
      mining_budget_(mining_budget),
      continuity_(election_id) {
  if (level == 0) throw Error(Errc::LevelMismatch, "upper chains start at level 1");
  if (delegates_.delegates.empty()) throw Error(Errc::ConfigInvalid, "delegate set is empty");
}

SyncRound& UpperChain::open_round() {
  if (open_) throw Error(Errc::RoundAlreadyOpen, id_ + " already has round " + std::to_string(open_->round) + " open");
  open_ = SyncRound{next_round_++, level() - 1, level(), RoundState::Collecting};
  return *open_;
}

void UpperChain::close_round() {
  if (open_) open_->state = RoundState::Acked;
  open_.reset();
}

BatchBlock UpperChain::propose_block(std::string_view proposer, std::uint64_t round,
                                     const std::map<std::string, Lotb>& agreed) const {
  if (proposer != delegates_.proposer(round)) {
    throw Error(Errc::NotProposer, std::string(proposer) + " is not the proposer of round " + std::to_string(round));
  }
  BatchBlock block;
  block.election_id = chain_.election_id();
  block.level = level();
  block.round = round;
  block.prev_hash = chain_.tip_hash();
  for (const auto& [source, lotb] : agreed) {
    block.lotb.votes.insert(block.lotb.votes.end(), lotb.votes.begin(), lotb.votes.end());
    block.lotb.batches.insert(block.lotb.batches.end(), lotb.batches.begin(), lotb.batches.end());
  }
  if (auto pattern = difficulty_.at(level()); pattern.zero_bits > 0) {
    block.nonce = mine(block, pattern, mining_budget_);
  }
  return block;
}

std::optional<Issue> UpperChain::review(const BatchBlock& proposal) const {
  if (auto issue = check_block(proposal, chain_.election_id(), level(), difficulty_)) return issue;
  if (proposal.prev_hash != chain_.tip_hash()) return Issue{Errc::BrokenLink, "proposal does not extend the chain tip"};
  if (!chain_.batches().empty() && proposal.round <= chain_.batches().back().round) {
    return Issue{Errc::BrokenLink, "proposal round does not advance"};
  }
  ContinuityTracker scratch = continuity_;
  return scratch.admit(proposal);
}

FinalizeOutcome UpperChain::dpos_finalize(const BatchBlock& proposal) {
  FinalizeOutcome out;
  const auto honest_verdict = review(proposal);
  for (std::size_t i = 0; i < delegates_.delegates.size(); ++i) {
    auto behavior = i < behaviors_.size() ? behaviors_[i] : DelegateBehavior::Honest;
    bool approve = behavior == DelegateBehavior::Colluding || (behavior == DelegateBehavior::Honest && !honest_verdict);
    out.approvals += approve ? 1 : 0;
  }
  out.finalized = delegates_.quorum_reached(out.approvals);
  if (honest_verdict) out.reason = honest_verdict->detail;
  if (!out.finalized) {
    if (out.reason.empty()) out.reason = "quorum not reached";
    return out;
  }
  // A quorum is authoritative: the block goes in even if honest review failed.
  continuity_.admit(proposal);
  chain_.push_unchecked(proposal);
  return out;
}

Lotb UpperChain::pending_batch() const {
  const auto& batches = chain_.batches();
  auto first = std::min<std::size_t>(accepted_count_, batches.size());
  Lotb out;
  out.batches.assign(batches.begin() + static_cast<std::ptrdiff_t>(first), batches.end());
  return out;
}

void UpperChain::apply_ack(const SyncAck& ack) {
  if (!sync_round_ || ack.round != *sync_round_) {
    throw Error(Errc::StaleAck, "ack for round " + std::to_string(ack.round) + " at " + id_);
  }
  if (ack.flag == AckFlag::Decline) return;
  if (accepted_count_ + ack.accepted_size > chain_.batches().size()) {
    throw Error(Errc::StaleAck, "ack accepts more blocks than " + id_ + " holds");
  }
  accepted_count_ += ack.accepted_size;
}

// ---------------------------------------------------------------------------

SyncRound& open_round(UpperChain& upper, std::span<LowerNode* const> lowers) {
  SyncRound& round = upper.open_round();
  for (LowerNode* node : lowers) node->begin_sync(round.round);
  return round;
}

std::optional<BatchSubmission> Transport::deliver(const BatchSubmission& submission, std::size_t) {
  return submission;
}

CycleOutcome run_sync_cycle(UpperChain& upper, std::span<LowerNode* const> lowers, Transport& transport,
                            const SyncOptions& options) {
  CycleOutcome out;
  std::vector<std::string> expected;
  for (LowerNode* node : lowers) expected.push_back(node->chain_id());

  std::uint32_t declines = 0;
  for (std::uint32_t attempt = 0;; ++attempt) {
    SyncRound& round = open_round(upper, lowers);
    const std::uint64_t round_no = round.round;
    AttemptLog log{round_no, attempt, AckFlag::Decline, {}, 0, 0, {}};

    std::vector<BatchSubmission> received;
    bool silent = false;
    std::map<std::string, std::size_t> sizes;
    for (LowerNode* node : lowers) {
      auto submission = make_submission(node->chain_id(), round_no, node->pending_batch());
      sizes[node->chain_id()] = submission.blocks.size();
      log.batch_sizes.emplace_back(node->chain_id(), submission.blocks.size());
      for (std::size_t d = 0; d < upper.delegates().delegates.size(); ++d) {
        if (auto copy = transport.deliver(submission, d)) {
          received.push_back(std::move(*copy));
        } else {
          silent = true;
        }
      }
    }

    round.state = RoundState::Deciding;
    auto consistency = check_consistency(received, expected);
    bool accepted = false;
    if (consistency.consistent) {
      const auto& proposer = upper.delegates().proposer(round_no);
      BatchBlock proposal = upper.propose_block(proposer, round_no, consistency.agreed);
      auto finalize = upper.dpos_finalize(proposal);
      log.approvals = finalize.approvals;
      accepted = finalize.finalized;
      if (accepted) {
        out.committed = proposal.lotb.size();
      } else {
        log.reason = finalize.reason;
      }
    } else {
      log.reason = consistency.reason;
    }

    // pause, submit, propose, approve, ack; a silent source costs the timeout
    log.duration_ms = options.latency_ms * (5 + (silent ? 3 : 0));
    log.flag = accepted ? AckFlag::Accept : AckFlag::Decline;
    out.duration_ms += log.duration_ms;

    for (LowerNode* node : lowers) {
      SyncAck ack{round_no, log.flag, accepted ? sizes[node->chain_id()] : 0};
      node->apply_ack(ack);
      out.acks[node->chain_id()] = ack;
    }
    upper.close_round();
    out.attempts.push_back(std::move(log));

    if (accepted) break;
    if (++declines >= options.retry_cap) {
      out.status = CycleStatus::RetryCapExceeded;
      break;
    }
  }

  if (options.resume) {
    for (LowerNode* node : lowers) node->end_sync();
  }
  return out;
}

}  // namespace hbvote
