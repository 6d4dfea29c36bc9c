// Acceptance checks for the whole toolkit. One line per criterion:
//   PASS|FAIL  <nn>  <name>  <measured values>
// Exit status is the number of failing criteria.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <latch>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "../unit/support.hpp"
#include "hbvote/audit.hpp"
#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "hbvote/run_dir.hpp"
#include "hbvote/sim.hpp"
#include "hbvote/sync.hpp"
#include "hbvote/tally.hpp"

using namespace hbvote;
using hbvote::testing::TempDir;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string measured;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

/// The reference election: 10,000 voters, 2 clusters of 10 centers, 8-hour day.
ElectionConfig reference_config() {
  ElectionConfig c;
  c.voters = 10'000;
  c.clusters = 2;
  c.centers_per_cluster = 10;
  c.levels = 2;
  c.sync_interval_s = 300;
  c.pause_s = 60;
  c.latency_ms = 100;
  c.zero_bits = {8};
  c.seed = 42;
  return c;
}

std::set<std::string> top_vote_digests(const Simulation& sim) {
  std::set<std::string> out;
  for (const Chain* top : sim.top_chains()) {
    for (const auto& v : flatten(*top, sim.config().difficulty())) out.insert(hash_of(v).hex());
  }
  return out;
}

bool has_incident(const SimulationReport& r, std::string_view kind) {
  return std::any_of(r.incidents.begin(), r.incidents.end(), [&](const Incident& i) { return i.kind == kind; });
}

/// Shared state: the clean reference run and its export.
struct Reference {
  TempDir dir{"acceptance"};
  std::unique_ptr<Simulation> sim;
  double run_seconds = 0;

  Reference() {
    auto start = Clock::now();
    sim = std::make_unique<Simulation>(reference_config());
    sim->run();
    write_run_directory(dir.path() / "run", *sim);
    run_seconds = seconds_since(start);
  }
  fs::path run_dir() const { return dir.path() / "run"; }
};

Outcome exact_recount(Reference& ref) {
  const auto& r = ref.sim->report();
  std::vector<VoteBlock> votes;
  for (const Chain* top : ref.sim->top_chains()) {
    auto flat = flatten(*top, ref.sim->config().difficulty());
    votes.insert(votes.end(), flat.begin(), flat.end());
  }
  auto recount = tally(votes, ref.sim->region_map(), ref.sim->registry().candidate_registry());
  std::uint64_t discrepancy = 0;
  for (const auto& [region, rt] : r.oracle.regions) {
    for (const auto& [cand, n] : rt.counts) {
      auto got = recount.regions[region].counts[cand];
      discrepancy += got > n ? got - n : n - got;
    }
  }
  bool pass = recount == r.oracle && recount == r.level0_tally && r.tally == recount && r.oracle.total == 10'000 &&
              discrepancy == 0 && ref.run_seconds < 60.0;
  return {pass, "votes=" + std::to_string(recount.total) + " discrepancy=" + std::to_string(discrepancy) +
                    " level0_equal=" + (recount == r.level0_tally ? "yes" : "no") +
                    " runtime_s=" + fixed(ref.run_seconds) + " (limit 60)"};
}

Outcome tamper_detection(Reference& ref) {
  RunAuditor auditor(ref.run_dir());
  const bool clean = auditor.audit().ok();
  auto stats = tamper_experiment(auditor, 1000, 42);
  bool pass = clean && stats.mutations.size() == 1000 && stats.detected() == 1000;
  return {pass, "clean_audit=" + std::string(clean ? "ok" : "findings") + " mutations=" +
                    std::to_string(stats.mutations.size()) + " detected=" + std::to_string(stats.detected()) +
                    " rate=" + fixed(stats.rate() * 100.0) + "% (required 100%)"};
}

Outcome double_vote_prevention(Reference& ref) {
  Simulation& sim = *ref.sim;
  std::size_t before = 0;
  for (const auto& c : sim.centers()) before += c.chain().size();

  std::size_t already_voted = 0;
  for (const auto& creds : sim.credentials()) {
    auto record = sim.registry().voter(creds.voter_id);
    VotingNode& node = sim.center_for_box(record->effective_ballot_box());
    try {
      node.cast_vote(sim.registry(), creds, "A");
    } catch (const Error& e) {
      if (e.code() == Errc::AlreadyVoted) ++already_voted;
    }
  }
  std::size_t after = 0;
  for (const auto& c : sim.centers()) after += c.chain().size();

  CandidateRegistry candidates;
  candidates.add_ballot_box("box-000", {{"A", "A"}});
  Registry registry("race", std::move(candidates));
  registry.add_station("center-000", "box-000");
  const Credentials voter{"voter-000000", "pw-race"};
  registry.add_voter(voter.voter_id, voter.password, "box-000");
  constexpr int kAttempts = 1000;
  std::atomic<int> successes{0};
  std::latch start(kAttempts);
  std::vector<std::thread> threads;
  for (int i = 0; i < kAttempts; ++i) {
    threads.emplace_back([&] {
      start.arrive_and_wait();
      try {
        registry.mark_voted(registry.validate(voter, "center-000"));
        ++successes;
      } catch (const Error&) {
      }
    });
  }
  for (auto& t : threads) t.join();

  bool pass = already_voted == 10'000 && after == before && successes.load() == 1;
  return {pass, "replays=" + std::to_string(sim.credentials().size()) + " AlreadyVoted=" +
                    std::to_string(already_voted) + " chain_growth=" + std::to_string(after - before) +
                    " race_successes=" + std::to_string(successes.load()) + "/" + std::to_string(kAttempts)};
}

Outcome decline_retry() {
  FaultScript faults;
  faults.faults.push_back(Fault{FaultKind::ByzantineSubmission, "center-003", 4, 1, 0});
  Simulation sim(reference_config(), faults);
  const auto& r = sim.run();
  std::size_t declines = 0;
  bool accepted_after = false;
  for (std::size_t i = 0; i < r.round_log.size(); ++i) {
    const auto& e = r.round_log[i];
    if (e.cluster != "cluster-000" || e.flag != AckFlag::Decline) continue;
    ++declines;
    for (std::size_t k = i + 1; k < r.round_log.size(); ++k) {
      if (r.round_log[k].cluster != "cluster-000") continue;
      accepted_after = r.round_log[k].flag == AckFlag::Accept && r.round_log[k].round == e.round + 1;
      break;
    }
  }
  bool pass = declines >= 1 && accepted_after && r.tally_matches_oracle() && r.tally == r.level0_tally &&
              r.incidents.empty();
  return {pass, "declines=" + std::to_string(declines) + " accept_followed=" + (accepted_after ? "yes" : "no") +
                    " tally_exact=" + (r.tally_matches_oracle() ? "yes" : "no") +
                    " incidents=" + std::to_string(r.incidents.size())};
}

Outcome quorum_safety() {
  const Difficulty difficulty({8});
  CandidateRegistry candidates;
  candidates.add_ballot_box("box-000", {{"A", "A"}, {"B", "B"}});
  candidates.add_ballot_box("box-001", {{"A", "A"}, {"B", "B"}});
  Registry registry("quorum", std::move(candidates));
  VotingNode c0("center-000", "box-000", "E1", difficulty);
  VotingNode c1("center-001", "box-001", "E1", difficulty);
  registry.add_station("center-000", "box-000");
  registry.add_station("center-001", "box-001");
  for (int i = 0; i < 6; ++i) {
    VotingNode& node = i % 2 ? c1 : c0;
    Credentials creds{"voter-" + std::to_string(i), "pw-" + std::to_string(i)};
    registry.add_voter(creds.voter_id, creds.password, node.ballot_box_id());
    node.cast_vote(registry, creds, i % 3 ? "A" : "B");
  }
  const std::map<std::string, Lotb> agreed{{"center-000", c0.pending_batch()}, {"center-001", c1.pending_batch()}};

  auto fresh_chain = [&] {
    return UpperChain("cluster-000", "E1", 1, DelegateSet{{"d0", "d1", "d2", "d3"}}, difficulty);
  };
  auto tampered_proposal = [&](const UpperChain& chain) {
    BatchBlock p = chain.propose_block("d0", 0, agreed);
    auto& target = p.lotb.votes[1].candidate_id;
    target = target == "A" ? "B" : "A";
    return p;
  };

  auto one = fresh_chain();
  one.set_behaviors({DelegateBehavior::Colluding, DelegateBehavior::Honest, DelegateBehavior::Honest,
                     DelegateBehavior::Honest});
  auto rejected = one.dpos_finalize(tampered_proposal(one));

  auto three = fresh_chain();
  three.set_behaviors({DelegateBehavior::Colluding, DelegateBehavior::Colluding, DelegateBehavior::Colluding,
                       DelegateBehavior::Honest});
  auto finalized = three.dpos_finalize(tampered_proposal(three));

  bool pass = !rejected.finalized && rejected.approvals == 1 && one.chain().size() == 1 && finalized.finalized &&
              finalized.approvals == 3 && three.chain().size() == 2;
  return {pass, "1_colluder: approvals=" + std::to_string(rejected.approvals) + "/4 " +
                    (rejected.finalized ? "finalized" : "rejected") + "; 3_colluders: approvals=" +
                    std::to_string(finalized.approvals) + "/4 " + (finalized.finalized ? "finalized" : "rejected")};
}

Outcome anonymity(Reference& ref) {
  std::unordered_set<std::string> secrets;
  std::set<std::size_t> lengths;
  for (const auto& c : ref.sim->credentials()) {
    for (const auto* s : {&c.voter_id, &c.password}) {
      secrets.insert(*s);
      lengths.insert(s->size());
    }
  }
  std::size_t files = 0, bytes = 0, hits = 0;
  for (const auto& entry : fs::recursive_directory_iterator(ref.run_dir() / "chains")) {
    if (!entry.is_regular_file()) continue;
    const std::string text = read_file(entry.path());
    ++files;
    bytes += text.size();
    const std::string_view view(text);
    for (std::size_t len : lengths) {
      for (std::size_t i = 0; i + len <= view.size(); ++i) {
        if (secrets.count(std::string(view.substr(i, len)))) ++hits;
      }
    }
  }
  bool pass = files == 22 && hits == 0;
  return {pass, "files=" + std::to_string(files) + " bytes=" + std::to_string(bytes) +
                    " secrets=" + std::to_string(secrets.size()) + " occurrences=" + std::to_string(hits)};
}

Outcome counting_speed() {
  // 20 ballot boxes x 5,000 votes, batched into one level-1 chain of 10 rounds.
  constexpr std::size_t kBoxes = 20, kPerBox = 5'000, kRounds = 10;
  const Difficulty difficulty({4});
  CandidateRegistry candidates;
  RegionMap regions;
  std::vector<Chain> boxes;
  for (std::size_t b = 0; b < kBoxes; ++b) {
    std::string box = "box-" + std::to_string(100 + b);
    candidates.add_ballot_box(box, {{"A", "A"}, {"B", "B"}, {"C", "C"}});
    regions[box] = "region-" + std::to_string(b % 4);
    boxes.push_back(hbvote::testing::mined_vote_chain(kPerBox, 4, box, {"A", "B", "C", "BLANK"}));
  }
  Chain top("E1", 1);
  for (std::size_t r = 0; r < kRounds; ++r) {
    BatchBlock batch{"E1", 1, r, top.tip_hash(), {}, std::nullopt};
    for (const auto& chain : boxes) {
      auto first = chain.votes().begin() + static_cast<std::ptrdiff_t>(r * kPerBox / kRounds);
      batch.lotb.votes.insert(batch.lotb.votes.end(), first, first + kPerBox / kRounds);
    }
    top.push_unchecked(std::move(batch));
  }

  auto start = Clock::now();
  auto votes = flatten(top, difficulty);
  auto result = tally(votes, regions, candidates);
  double elapsed = seconds_since(start);
  bool pass = votes.size() == kBoxes * kPerBox && result.total == kBoxes * kPerBox && elapsed < 5.0;
  return {pass, "votes=" + std::to_string(result.total) + " flatten+tally_s=" + fixed(elapsed, 3) + " (limit 5)"};
}

Outcome pause_semantics(Reference& ref) {
  const auto& m = ref.sim->report().metrics;
  const std::uint64_t expected = ref.sim->config().election_duration_s / ref.sim->config().sync_interval_s;
  bool rounds_ok = true;
  std::string per_cluster;
  for (const auto& id : ref.sim->topology().cluster_ids) {
    const auto& s = m.rounds.at(id);
    rounds_ok = rounds_ok && s.scheduled == expected && s.drain == 1;
    per_cluster += " " + id + "=" + std::to_string(s.scheduled) + "+" + std::to_string(s.drain);
  }

  VotingNode probe("center-x", "box-000", "E1", Difficulty({8}));
  CandidateRegistry candidates;
  candidates.add_ballot_box("box-000", {{"A", "A"}});
  Registry registry("pause", std::move(candidates));
  registry.add_station("center-x", "box-000");
  registry.add_voter("voter-1", "pw", "box-000");
  probe.begin_sync(0);
  bool paused_rejected = false;
  try {
    probe.cast_vote(registry, {"voter-1", "pw"}, "A");
  } catch (const Error& e) {
    paused_rejected = e.code() == Errc::VotingPaused;
  }
  probe.end_sync();
  probe.cast_vote(registry, {"voter-1", "pw"}, "A");

  bool pass = rounds_ok && expected == 96 && paused_rejected && m.paused_rejections > 0 && m.unserved == 0 &&
              m.votes_cast == m.voters;
  return {pass, "VotingPaused=" + std::string(paused_rejected ? "yes" : "no") +
                    " paused_rejections=" + std::to_string(m.paused_rejections) + " retried_cast=" +
                    std::to_string(m.votes_cast) + "/" + std::to_string(m.voters) + " unserved=" +
                    std::to_string(m.unserved) + " rounds(scheduled+drain):" + per_cluster};
}

Outcome disaster_recovery() {
  FaultScript faults;
  faults.faults.push_back(Fault{FaultKind::CenterDown, "center-007", std::nullopt, 1, 4 * 3600 * 1000});
  Simulation sim(reference_config(), faults);
  const auto& r = sim.run();
  const VotingNode& down = sim.centers()[7];

  auto committed = top_vote_digests(sim);
  std::size_t present = 0;
  for (const auto& v : down.chain().votes()) present += committed.count(hash_of(v).hex());

  std::size_t moved_voted = 0, moved = 0;
  for (const auto& creds : sim.credentials()) {
    auto rec = sim.registry().voter(creds.voter_id);
    if (rec->assigned_ballot_box != "box-007" || !rec->reassigned_to) continue;
    ++moved;
    moved_voted += rec->voted ? 1 : 0;
  }
  bool pass = down.down() && !down.chain().votes().empty() && present == down.chain().votes().size() &&
              moved == r.metrics.reassigned && moved > 0 && moved_voted == moved && r.metrics.unserved == 0 &&
              r.tally_matches_oracle() && r.tally == r.level0_tally && !has_incident(r, "tally_mismatch");
  return {pass, "committed_before_down=" + std::to_string(down.chain().votes().size()) + " in_final_tally=" +
                    std::to_string(present) + " reassigned=" + std::to_string(moved) + " voted_elsewhere=" +
                    std::to_string(moved_voted) + " unserved=" + std::to_string(r.metrics.unserved) +
                    " tally_exact=" + (r.tally_matches_oracle() ? "yes" : "no")};
}

Outcome mining_statistics() {
  constexpr int kDrafts = 100;
  const DifficultyPattern pattern{8};
  const double p = 1.0 / 256.0;
  const double sigma_mean = std::sqrt((1.0 - p) / (p * p)) / std::sqrt(double{kDrafts});

  auto mine_all = [&] {
    std::vector<std::string> nonces;
    for (int i = 0; i < kDrafts; ++i) {
      VoteBlock draft{"E1", "box-" + std::to_string(i % 7), i % 2 ? "A" : "B", sha256("draft-" + std::to_string(i)),
                      ""};
      nonces.push_back(mine(draft, pattern));
    }
    return nonces;
  };
  auto first = mine_all();
  auto second = mine_all();
  double total = 0;
  for (const auto& n : first) total += std::stod(n) + 1.0;
  const double mean = total / kDrafts;
  bool pass = std::abs(mean - 256.0) <= 3.0 * sigma_mean && first == second;
  return {pass, "mean_attempts=" + fixed(mean) + " expected=256 band=+-" + fixed(3.0 * sigma_mean) +
                    " deterministic=" + (first == second ? "yes" : "no")};
}

Outcome determinism() {
  TempDir dir("determinism");
  FaultScript faults;
  faults.faults.push_back(Fault{FaultKind::ByzantineSubmission, "center-012", 7, 1, 0});
  faults.faults.push_back(Fault{FaultKind::DropSubmission, "center-002", 30, 1, 0});
  for (const char* name : {"a", "b"}) {
    Simulation sim(reference_config(), faults);
    sim.run();
    write_run_directory(dir / name, sim);
  }
  std::size_t compared = 0, differing = 0;
  std::vector<fs::path> files{"rounds.jsonl"};
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a" / "chains")) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir / "a"));
  }
  for (const auto& rel : files) {
    ++compared;
    if (!fs::exists(dir / "b" / rel) || read_file(dir / "a" / rel) != read_file(dir / "b" / rel)) ++differing;
  }
  bool pass = compared == 23 && differing == 0;
  return {pass, "files_compared=" + std::to_string(compared) + " differing=" + std::to_string(differing)};
}

}  // namespace

int main() {
  std::unique_ptr<Reference> ref;
  std::string setup_error;
  try {
    ref = std::make_unique<Reference>();
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  auto with_ref = [&](Outcome (*fn)(Reference&)) {
    return [&, fn]() -> Outcome {
      if (!ref) return {false, "reference run failed: " + setup_error};
      return fn(*ref);
    };
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exact recount", with_ref(exact_recount)},
      {"tamper detection", with_ref(tamper_detection)},
      {"double-vote prevention", with_ref(double_vote_prevention)},
      {"decline/retry protocol", decline_retry},
      {"quorum safety", quorum_safety},
      {"anonymity", with_ref(anonymity)},
      {"counting speed", counting_speed},
      {"pause semantics", with_ref(pause_semantics)},
      {"disaster recovery", disaster_recovery},
      {"mining statistics", mining_statistics},
      {"determinism", determinism},
  };

  // Replaying credentials mutates the reference run, so it goes after every
  // other reader of it.
  const std::vector<std::size_t> order{0, 1, 5, 7, 2, 3, 4, 6, 8, 9, 10};
  std::vector<Outcome> outcomes(criteria.size());
  for (std::size_t i : order) {
    try {
      outcomes[i] = criteria[i].second();
    } catch (const std::exception& e) {
      outcomes[i] = {false, std::string("exception: ") + e.what()};
    }
  }

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& o = outcomes[i];
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1 < 10 ? "0" : "") << i + 1 << "  " << criteria[i].first
              << "  " << o.measured << '\n';
  }
  std::cout << criteria.size() - failures << "/" << criteria.size() << " criteria pass\n";
  return failures;
}
