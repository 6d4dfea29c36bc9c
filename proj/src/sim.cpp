#include "hbvote/sim.hpp"

#include <algorithm>
#include <cstdio>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "json.hpp"

namespace hbvote {

std::uint64_t Rng::below(std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

void EventQueue::schedule(std::uint64_t time_ms, EventKind kind, std::uint64_t subject, std::uint32_t attempt) {
  heap_.push(Event{std::max(time_ms, now_), next_seq_++, kind, subject, attempt});
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  now_ = e.time_ms;
  return e;
}

// ---------------------------------------------------------------------------

FaultScript FaultScript::from_jsonl(std::string_view text) {
  static const std::map<std::string, FaultKind> kinds = {
      {"tamper", FaultKind::Tamper},
      {"byzantine_submission", FaultKind::ByzantineSubmission},
      {"center_down", FaultKind::CenterDown},
      {"drop_submission", FaultKind::DropSubmission},
  };
  FaultScript script;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw ParseError(line_no, "fault must be a JSON object");
      Fault f;
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        if (key == "kind") {
          auto found = kinds.find(it.value().get<std::string>());
          if (found == kinds.end()) throw ParseError(line_no, "unknown fault kind " + it.value().dump());
          f.kind = found->second;
        } else if (key == "node" || key == "center") {
          f.node = it.value().get<std::string>();
        } else if (key == "round") {
          f.round = it.value().get<std::uint64_t>();
        } else if (key == "block_index") {
          f.block_index = it.value().get<std::size_t>();
        } else if (key == "at_s") {
          f.at_ms = it.value().get<std::uint64_t>() * 1000;
        } else if (key == "at_ms") {
          f.at_ms = it.value().get<std::uint64_t>();
        } else {
          throw ParseError(line_no, "unknown fault key '" + key + "'");
        }
      }
      if (!j.contains("kind")) throw ParseError(line_no, "fault lacks kind");
      if (f.node.empty()) throw ParseError(line_no, "fault lacks node");
      script.faults.push_back(std::move(f));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return script;
}

// ---------------------------------------------------------------------------

/// Applies submission faults on the way to the delegates.
class Simulation::FaultTransport final : public Transport {
 public:
  std::vector<Fault> faults;

  std::optional<BatchSubmission> deliver(const BatchSubmission& submission, std::size_t delegate_index) override {
    for (const auto& f : faults) {
      if (f.node != submission.source_chain_id || (f.round && *f.round != submission.round)) continue;
      if (f.kind == FaultKind::DropSubmission) return std::nullopt;
      if (f.kind == FaultKind::ByzantineSubmission && delegate_index == 0) return corrupt(submission);
    }
    return submission;
  }

 private:
  // Equivocation: delegate 0 receives a self-consistent but different batch.
  static BatchSubmission corrupt(const BatchSubmission& original) {
    BatchSubmission copy = original;
    if (!copy.blocks.votes.empty()) {
      copy.blocks.votes.front().nonce += "0";
      copy.batch_hash = batch_hash_of(copy.blocks);
    } else if (!copy.blocks.batches.empty()) {
      copy.blocks.batches.front().round += 1;
      copy.batch_hash = batch_hash_of(copy.blocks);
    } else {
      copy.batch_hash = sha256("equivocation|" + original.source_chain_id);
    }
    return copy;
  }
};

namespace {

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string voter_name(std::uint64_t index, std::uint64_t count) {
  std::string digits = std::to_string(index);
  std::size_t width = std::max<std::size_t>(6, std::to_string(count > 0 ? count - 1 : 0).size());
  return "voter-" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

std::uint64_t distance(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : b - a; }

/// Swaps the candidate of one vote to the next one on the same ballot.
void rewrite_vote(VoteBlock& vote, const CandidateRegistry& candidates) {
  auto list = candidates.candidates_for(vote.ballot_box_id);
  auto it = std::find_if(list.begin(), list.end(), [&](const Candidate& c) { return c.id == vote.candidate_id; });
  std::size_t next = it == list.end() ? 0 : (static_cast<std::size_t>(it - list.begin()) + 1) % list.size();
  vote.candidate_id = list[next].id;
}

bool rewrite_first_vote(Lotb& lotb, const CandidateRegistry& candidates) {
  if (!lotb.votes.empty()) {
    rewrite_vote(lotb.votes.front(), candidates);
    return true;
  }
  for (auto& b : lotb.batches) {
    if (rewrite_first_vote(b.lotb, candidates)) return true;
  }
  return false;
}

TallyResult checked_tally(const std::vector<VoteBlock>& votes, const RegionMap& regions,
                          const CandidateRegistry& candidates, std::vector<Incident>& incidents,
                          std::string_view what, std::uint64_t now) {
  try {
    return tally(votes, regions, candidates);
  } catch (const Error& e) {
    incidents.push_back(Incident{"tally_error", std::string(what), 0, now, e.what()});
    return {};
  }
}

}  // namespace

Simulation::Simulation(ElectionConfig config, FaultScript faults)
    : config_(std::move(config)), faults_(std::move(faults)), transport_(std::make_unique<FaultTransport>()) {
  config_.validate();
  topology_ = make_topology(config_);
  auto candidates = make_candidates(config_, topology_);
  regions_ = make_region_map(config_, topology_);
  registry_ = std::make_unique<Registry>(config_.registry_salt, std::move(candidates));

  const Difficulty difficulty = config_.difficulty();
  centers_.reserve(topology_.centers.size());
  for (std::size_t i = 0; i < topology_.centers.size(); ++i) {
    const auto& spec = topology_.centers[i];
    centers_.emplace_back(spec.node_id, spec.ballot_box_id, config_.election_id, difficulty, config_.mining_budget);
    center_by_box_.emplace(spec.ballot_box_id, i);
    registry_->add_station(spec.node_id, spec.ballot_box_id);
  }

  auto delegates_of = [&](const std::string& chain_id) {
    DelegateSet set;
    for (std::uint32_t d = 0; d < config_.delegates_per_cluster; ++d) set.delegates.push_back(chain_id + "/d" + std::to_string(d));
    return set;
  };
  if (config_.levels >= 2) {
    auto& clusters = uppers_.emplace_back();
    for (const auto& id : topology_.cluster_ids) {
      clusters.emplace_back(id, config_.election_id, 1, delegates_of(id), difficulty, config_.mining_budget);
    }
    for (std::size_t k = 0; k < topology_.upper_ids.size(); ++k) {
      const auto& id = topology_.upper_ids[k];
      uppers_.emplace_back().emplace_back(id, config_.election_id, static_cast<std::uint32_t>(k + 2), delegates_of(id),
                                          difficulty, config_.mining_budget);
    }
  }

  // Workload: credentials, arrival time and raw candidate choice per voter.
  Rng rng(config_.seed);
  const std::uint64_t duration_ms = config_.election_duration_s * 1000;
  if (!config_.registry_file.empty()) {
    credentials_ = registry_->load_voters_jsonl(read_file(config_.resolve(config_.registry_file)));
  } else {
    credentials_.reserve(config_.voters);
    for (std::uint64_t i = 0; i < config_.voters; ++i) {
      Credentials c{voter_name(i, config_.voters), "pw-" + hex16(rng.next())};
      registry_->add_voter(c.voter_id, c.password, topology_.centers[i % topology_.centers.size()].ballot_box_id);
      credentials_.push_back(std::move(c));
    }
  }
  arrival_ms_.reserve(credentials_.size());
  choice_.reserve(credentials_.size());
  for (std::size_t i = 0; i < credentials_.size(); ++i) {
    arrival_ms_.push_back(rng.below(duration_ms));
    choice_.push_back(rng.next());
  }
  resume_at_.assign(topology_.cluster_ids.size(), 0);

  for (const auto& f : faults_.faults) {
    bool known = false;
    switch (f.kind) {
      case FaultKind::Tamper:
        known = std::any_of(centers_.begin(), centers_.end(), [&](const auto& c) { return c.node_id() == f.node; });
        for (const auto& level : uppers_) {
          known = known || std::any_of(level.begin(), level.end(), [&](const auto& u) { return u.chain_id() == f.node; });
        }
        break;
      case FaultKind::CenterDown:
        known = std::any_of(centers_.begin(), centers_.end(), [&](const auto& c) { return c.node_id() == f.node; });
        break;
      case FaultKind::ByzantineSubmission:
      case FaultKind::DropSubmission:
        known = config_.levels >= 2 &&
                std::any_of(centers_.begin(), centers_.end(), [&](const auto& c) { return c.node_id() == f.node; });
        for (std::size_t k = 0; k + 1 < uppers_.size(); ++k) {
          known = known || std::any_of(uppers_[k].begin(), uppers_[k].end(),
                                       [&](const auto& u) { return u.chain_id() == f.node; });
        }
        break;
    }
    if (!known) throw Error(Errc::UnknownEntity, "fault refers to unknown node " + f.node);
  }
}

Simulation::~Simulation() = default;

void Simulation::persist_counts_to(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (auto& c : centers_) c.persist_to(dir / (c.node_id() + ".count"));
}

VotingNode& Simulation::center_for_box(std::string_view ballot_box_id) {
  auto it = center_by_box_.find(ballot_box_id);
  if (it == center_by_box_.end()) throw Error(Errc::UnknownBallotBox, std::string(ballot_box_id));
  return centers_[it->second];
}

std::vector<const Chain*> Simulation::top_chains() const {
  std::vector<const Chain*> out;
  if (uppers_.empty()) {
    for (const auto& c : centers_) out.push_back(&c.chain());
  } else {
    for (const auto& u : uppers_.back()) out.push_back(&u.chain());
  }
  return out;
}

void Simulation::inject(const Fault& fault) {
  auto center = std::find_if(centers_.begin(), centers_.end(), [&](const auto& c) { return c.node_id() == fault.node; });
  switch (fault.kind) {
    case FaultKind::Tamper: {
      Lotb* body = nullptr;
      if (center != centers_.end()) {
        body = &center->mutable_chain().mutable_body();
      } else {
        for (auto& level : uppers_) {
          for (auto& u : level) {
            if (u.chain_id() == fault.node) body = &u.mutable_chain().mutable_body();
          }
        }
      }
      if (body == nullptr) throw Error(Errc::UnknownEntity, "no chain named " + fault.node);
      if (fault.block_index == 0 || fault.block_index > body->size()) {
        throw Error(Errc::UnknownEntity, fault.node + " has no block " + std::to_string(fault.block_index));
      }
      const std::size_t i = fault.block_index - 1;
      const auto& candidates = registry_->candidate_registry();
      if (i < body->votes.size()) {
        rewrite_vote(body->votes[i], candidates);
      } else if (!rewrite_first_vote(body->batches[i - body->votes.size()].lotb, candidates)) {
        body->batches[i - body->votes.size()].round += 1;
      }
      break;
    }
    case FaultKind::CenterDown:
      if (center == centers_.end()) throw Error(Errc::UnknownEntity, "no voting center named " + fault.node);
      apply_center_down(static_cast<std::size_t>(center - centers_.begin()));
      break;
    case FaultKind::ByzantineSubmission:
    case FaultKind::DropSubmission: {
      bool known = center != centers_.end();
      for (std::size_t k = 0; k + 1 < uppers_.size(); ++k) {
        for (const auto& u : uppers_[k]) known = known || u.chain_id() == fault.node;
      }
      if (!known) throw Error(Errc::UnknownEntity, "no source chain named " + fault.node);
      transport_->faults.push_back(fault);
      break;
    }
  }
}

void Simulation::apply_center_down(std::size_t index) {
  VotingNode& down = centers_[index];
  down.set_down(true);
  const auto& spec = topology_.centers[index];

  std::optional<std::size_t> best;
  auto better = [&](std::size_t candidate) {
    if (centers_[candidate].down()) return false;
    if (!best) return true;
    const auto& a = topology_.centers[candidate];
    const auto& b = topology_.centers[*best];
    bool a_local = a.cluster == spec.cluster;
    bool b_local = b.cluster == spec.cluster;
    if (a_local != b_local) return a_local;
    std::uint64_t da = a_local ? distance(a.index_in_cluster, spec.index_in_cluster) : distance(candidate, index);
    std::uint64_t db = b_local ? distance(b.index_in_cluster, spec.index_in_cluster) : distance(*best, index);
    return da < db || (da == db && candidate < *best);
  };
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    if (better(i)) best = i;
  }
  report_.incidents.push_back(Incident{"center_down", down.node_id(), 0, queue_.now(),
                                       best ? "voters moved to " + centers_[*best].node_id() : "no live center left"});
  if (!best) return;
  for (const auto& voter : registry_->unvoted_at(down.ballot_box_id())) {
    registry_->reassign(voter, centers_[*best].ballot_box_id());
    ++report_.metrics.reassigned;
  }
}

void Simulation::handle_arrival(const Event& e) {
  const std::uint64_t close_ms = config_.election_duration_s * 1000;
  const auto& creds = credentials_[e.subject];
  if (e.time_ms >= close_ms) {
    ++report_.metrics.unserved;
    return;
  }
  auto record = registry_->voter(creds.voter_id);
  const std::string& box = record->effective_ballot_box();
  auto center_it = center_by_box_.find(box);
  VotingNode& center = centers_[center_it->second];
  auto list = registry_->candidates_for(box);
  const std::string& candidate = list[choice_[e.subject] % list.size()].id;
  try {
    center.cast_vote(*registry_, creds, candidate);
    ++oracle_counts_[regions_.at(box)][candidate];
    ++report_.metrics.votes_cast;
  } catch (const Error& err) {
    if (err.code() == Errc::VotingPaused) {
      ++report_.metrics.paused_rejections;
      const std::uint64_t retry = resume_at_[topology_.centers[center_it->second].cluster];
      if (retry >= close_ms) {
        ++report_.metrics.unserved;
      } else {
        queue_.schedule(retry, EventKind::Arrival, e.subject, e.attempt + 1);
      }
    } else {
      ++report_.metrics.unserved;
      report_.incidents.push_back(Incident{"cast_rejected", center.node_id(), 0, e.time_ms, err.what()});
    }
  }
}

void Simulation::record_cycle(const UpperChain& upper, const CycleOutcome& outcome, bool drain) {
  auto& stats = report_.metrics.rounds[upper.chain_id()];
  (drain ? stats.drain : stats.scheduled) += 1;
  std::uint64_t t = queue_.now();
  for (const auto& a : outcome.attempts) {
    report_.round_log.push_back(RoundLogEntry{t, upper.level(), upper.chain_id(), a.round, a.attempt, a.flag,
                                              a.batch_sizes, a.approvals, a.duration_ms, drain, a.reason});
    t += a.duration_ms;
    ++stats.attempts;
    if (a.flag == AckFlag::Decline) ++stats.declines;
  }
  if (outcome.status == CycleStatus::RetryCapExceeded) {
    ++stats.retry_cap_exceeded;
    const auto& last = outcome.attempts.back();
    report_.incidents.push_back(Incident{"retry_cap_exceeded", upper.chain_id(), last.round, queue_.now(), last.reason});
  }
}

void Simulation::sync_level(std::size_t upper_index, bool drain, bool resume) {
  const SyncOptions options{config_.retry_cap, config_.latency_ms, resume};
  auto& level = uppers_[upper_index];
  for (std::size_t c = 0; c < level.size(); ++c) {
    std::vector<LowerNode*> lowers;
    if (upper_index == 0) {
      for (std::size_t i = 0; i < centers_.size(); ++i) {
        if (topology_.centers[i].cluster == c) lowers.push_back(&centers_[i]);
      }
    } else {
      for (auto& u : uppers_[upper_index - 1]) lowers.push_back(&u);
    }
    auto outcome = run_sync_cycle(level[c], lowers, *transport_, options);
    record_cycle(level[c], outcome, drain);
    if (upper_index == 0 && !resume) {
      const std::uint64_t resume_ms = queue_.now() + std::max(config_.pause_s * 1000, outcome.duration_ms);
      resume_at_[c] = resume_ms;
      queue_.schedule(resume_ms, EventKind::Resume, c);
    }
  }
}

void Simulation::handle_tick(std::uint64_t tick, bool drain) {
  registry_->begin_round(tick);
  for (std::size_t k = 0; k < uppers_.size(); ++k) sync_level(k, drain, drain || k > 0);
}

void Simulation::finish() {
  auto& m = report_.metrics;
  m.voters = credentials_.size();
  m.end_time_ms = queue_.now();
  const auto& candidates = registry_->candidate_registry();
  const Difficulty difficulty = config_.difficulty();

  report_.oracle = tally_from_counts(oracle_counts_, regions_, candidates);

  std::vector<VoteBlock> level0;
  for (const auto& c : centers_) {
    flatten_unchecked(c.chain(), level0);
    if (auto v = validate_chain(c.chain(), difficulty); !v.ok()) {
      report_.incidents.push_back(Incident{"invalid_chain", c.node_id(), 0, m.end_time_ms,
                                           "block " + std::to_string(v.failure->index) + ": " + v.failure->detail});
    }
  }
  m.votes_committed_per_level.push_back(level0.size());
  report_.level0_tally = checked_tally(level0, regions_, candidates, report_.incidents, "level 0", m.end_time_ms);

  for (const auto& level : uppers_) {
    std::vector<VoteBlock> votes;
    for (const auto& u : level) {
      flatten_unchecked(u.chain(), votes);
      if (auto v = validate_chain(u.chain(), difficulty); !v.ok()) {
        report_.incidents.push_back(Incident{"invalid_chain", u.chain_id(), 0, m.end_time_ms,
                                             "block " + std::to_string(v.failure->index) + ": " + v.failure->detail});
      }
    }
    m.votes_committed_per_level.push_back(votes.size());
    if (&level == &uppers_.back()) {
      report_.tally = checked_tally(votes, regions_, candidates, report_.incidents, "top level", m.end_time_ms);
    }
  }
  if (uppers_.empty()) report_.tally = report_.level0_tally;

  if (m.unserved > 0) {
    report_.incidents.push_back(
        Incident{"unserved_voters", {}, 0, m.end_time_ms, std::to_string(m.unserved) + " voters could not cast"});
  }
  if (!report_.tally_matches_oracle()) {
    report_.incidents.push_back(Incident{"tally_mismatch", {}, 0, m.end_time_ms, "top-level tally differs from the oracle"});
  }
  if (report_.tally != report_.level0_tally) {
    report_.incidents.push_back(
        Incident{"level_mismatch", {}, 0, m.end_time_ms, "top-level tally differs from the level-0 chains"});
  }
}

const SimulationReport& Simulation::run() {
  if (ran_) return report_;
  ran_ = true;
  const std::uint64_t duration_ms = config_.election_duration_s * 1000;
  const std::uint64_t interval_ms = config_.sync_interval_s * 1000;

  for (std::size_t i = 0; i < credentials_.size(); ++i) queue_.schedule(arrival_ms_[i], EventKind::Arrival, i);
  for (std::size_t i = 0; i < faults_.faults.size(); ++i) {
    const auto& f = faults_.faults[i];
    if (f.kind == FaultKind::Tamper || f.kind == FaultKind::CenterDown) {
      queue_.schedule(f.at_ms, EventKind::Fault, i);
    } else {
      transport_->faults.push_back(f);
    }
  }
  const std::uint64_t ticks = duration_ms / interval_ms;
  for (std::uint64_t k = 1; k <= ticks; ++k) queue_.schedule(k * interval_ms, EventKind::Tick, k);

  while (!queue_.empty()) {
    Event e = queue_.pop();
    switch (e.kind) {
      case EventKind::Arrival:
        handle_arrival(e);
        break;
      case EventKind::Tick:
        handle_tick(e.subject, false);
        break;
      case EventKind::Resume:
        for (std::size_t i = 0; i < centers_.size(); ++i) {
          if (topology_.centers[i].cluster == e.subject) centers_[i].end_sync();
        }
        break;
      case EventKind::Fault:
        try {
          inject(faults_.faults[e.subject]);
        } catch (const Error& err) {
          report_.incidents.push_back(Incident{"fault_rejected", faults_.faults[e.subject].node, 0, e.time_ms, err.what()});
        }
        break;
    }
  }

  // Final drain once polls are closed and every pause has ended.
  queue_.schedule(duration_ms, EventKind::Tick, ticks + 1);
  handle_tick(queue_.pop().subject, true);
  finish();
  return report_;
}

}  // namespace hbvote
