#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hbvote/config.hpp"
#include "hbvote/registry.hpp"
#include "hbvote/sync.hpp"
#include "hbvote/tally.hpp"
#include "hbvote/voting_node.hpp"

namespace hbvote {

/// mt19937_64 with a bounded draw that is identical on every platform
/// (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

enum class EventKind { Arrival, Tick, Resume, Fault };

struct Event {
  std::uint64_t time_ms = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Tick;
  std::uint64_t subject = 0;
  std::uint32_t attempt = 0;
};

/// Simulated clock: events ordered by (time, insertion sequence).
class EventQueue {
 public:
  void schedule(std::uint64_t time_ms, EventKind kind, std::uint64_t subject, std::uint32_t attempt = 0);
  bool empty() const { return heap_.empty(); }
  /// Pops the earliest event and advances now() to its time.
  Event pop();
  std::uint64_t now() const { return now_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time_ms != b.time_ms ? a.time_ms > b.time_ms : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t now_ = 0;
};

enum class FaultKind { Tamper, ByzantineSubmission, CenterDown, DropSubmission };

struct Fault {
  FaultKind kind = FaultKind::Tamper;
  std::string node;
  /// Round number for submission faults; empty means every round.
  std::optional<std::uint64_t> round;
  std::size_t block_index = 1;
  std::uint64_t at_ms = 0;
};

/// One JSON object per line, e.g.
/// {"kind": "byzantine_submission", "node": "center-003", "round": 4}
/// {"kind": "center_down", "node": "center-007", "at_s": 14400}
/// {"kind": "tamper", "node": "center-001", "block_index": 3, "at_s": 900}
struct FaultScript {
  std::vector<Fault> faults;

  static FaultScript from_jsonl(std::string_view text);
};

struct Incident {
  std::string kind;
  std::string chain;
  std::uint64_t round = 0;
  std::uint64_t time_ms = 0;
  std::string detail;
};

struct RoundLogEntry {
  std::uint64_t time_ms = 0;
  std::uint32_t upper_level = 1;
  std::string cluster;
  std::uint64_t round = 0;
  std::uint32_t retries = 0;
  AckFlag flag = AckFlag::Decline;
  std::vector<std::pair<std::string, std::size_t>> batch_sizes;
  std::size_t approvals = 0;
  std::uint64_t duration_ms = 0;
  bool drain = false;
  std::string reason;
};

struct ChainRoundStats {
  std::uint32_t scheduled = 0;
  std::uint32_t drain = 0;
  std::uint32_t attempts = 0;
  std::uint32_t declines = 0;
  std::uint32_t retry_cap_exceeded = 0;
};

struct SimMetrics {
  std::uint64_t voters = 0;
  std::uint64_t votes_cast = 0;
  std::uint64_t paused_rejections = 0;
  std::uint64_t unserved = 0;
  std::uint64_t reassigned = 0;
  std::uint64_t end_time_ms = 0;
  std::map<std::string, ChainRoundStats> rounds;
  /// Votes reachable from the chains of each level, level 0 first.
  std::vector<std::uint64_t> votes_committed_per_level;
};

struct SimulationReport {
  TallyResult oracle;
  TallyResult tally;         // from the top-level chains
  TallyResult level0_tally;  // from the union of the voting-center chains
  std::vector<RoundLogEntry> round_log;
  SimMetrics metrics;
  std::vector<Incident> incidents;

  bool tally_matches_oracle() const { return tally == oracle; }
};

/// The whole hierarchy for one election, driven by a seeded event loop.
class Simulation {
 public:
  /// Builds the topology, registry and workload. Throws ConfigInvalid.
  explicit Simulation(ElectionConfig config, FaultScript faults = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Accepted counts are persisted under `dir` as <node_id>.count.
  void persist_counts_to(const std::filesystem::path& dir);

  /// Runs the election day and the final drain. Call once.
  const SimulationReport& run();
  const SimulationReport& report() const { return report_; }

  /// Applies a fault immediately. Throws UnknownEntity.
  void inject(const Fault& fault);

  const ElectionConfig& config() const { return config_; }
  const Topology& topology() const { return topology_; }
  const RegionMap& region_map() const { return regions_; }
  Registry& registry() { return *registry_; }
  const Registry& registry() const { return *registry_; }
  std::vector<VotingNode>& centers() { return centers_; }
  const std::vector<VotingNode>& centers() const { return centers_; }
  /// uppers()[0] holds the level-1 cluster chains, uppers()[k] level k+1.
  const std::vector<std::vector<UpperChain>>& uppers() const { return uppers_; }
  std::vector<std::vector<UpperChain>>& uppers() { return uppers_; }
  std::vector<const Chain*> top_chains() const;
  const std::vector<Credentials>& credentials() const { return credentials_; }
  /// Station node serving a ballot box.
  VotingNode& center_for_box(std::string_view ballot_box_id);

 private:
  class FaultTransport;

  void handle_arrival(const Event& e);
  void handle_tick(std::uint64_t tick, bool drain);
  void sync_level(std::size_t upper_index, bool drain, bool resume);
  void record_cycle(const UpperChain& upper, const CycleOutcome& outcome, bool drain);
  void apply_center_down(std::size_t center_index);
  void finish();

  ElectionConfig config_;
  FaultScript faults_;
  Topology topology_;
  RegionMap regions_;
  std::unique_ptr<Registry> registry_;
  std::vector<VotingNode> centers_;
  std::map<std::string, std::size_t, std::less<>> center_by_box_;
  std::vector<std::vector<UpperChain>> uppers_;
  std::vector<Credentials> credentials_;
  std::vector<std::uint64_t> arrival_ms_;
  std::vector<std::uint64_t> choice_;
  std::vector<std::uint64_t> resume_at_;  // per cluster
  std::map<std::string, std::map<std::string, std::uint64_t>> oracle_counts_;
  std::unique_ptr<FaultTransport> transport_;
  EventQueue queue_;
  SimulationReport report_;
  bool ran_ = false;
};

}  // namespace hbvote
