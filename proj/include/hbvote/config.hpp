#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hbvote/chain.hpp"
#include "hbvote/registry.hpp"

namespace hbvote {

inline constexpr std::uint64_t kDeskScaleVoterLimit = 1'000'000;

/// Election parameters. Defaults carry the national-scale protocol constants;
/// desk-scale runs override voters, clusters and centers.
struct ElectionConfig {
  std::string election_id = "E1";
  std::uint32_t levels = 2;
  std::uint32_t clusters = 700;
  std::uint32_t centers_per_cluster = 10;
  std::uint64_t voters = 56'000'000;
  std::uint64_t sync_interval_s = 300;
  std::uint64_t pause_s = 60;
  std::uint64_t latency_ms = 100;
  std::vector<std::uint32_t> zero_bits{8};
  std::uint64_t election_duration_s = 8 * 3600;
  std::uint64_t seed = 42;
  std::uint32_t retry_cap = 10;
  std::uint64_t mining_budget = kDefaultMiningBudget;
  std::uint32_t delegates_per_cluster = 4;
  std::vector<std::string> candidates{"A", "B", "C"};
  std::string candidates_file;
  std::string region_map_file;
  std::string registry_file;
  std::string registry_salt = "hbvote-mock-egov";
  bool override_scale = false;

  /// Directory relative file references resolve against. Not serialized.
  std::filesystem::path base_dir;

  /// Throws ConfigInvalid.
  void validate() const;
  Difficulty difficulty() const { return Difficulty(zero_bits); }
  std::filesystem::path resolve(const std::string& file) const;
};

/// `key = value` lines; '#' starts a comment; unknown keys are errors.
ElectionConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ElectionConfig load_config(const std::filesystem::path& path);
/// Every key, one per line, in a fixed order.
std::string format_config(const ElectionConfig& config);

struct CenterSpec {
  std::string node_id;
  std::string ballot_box_id;
  std::uint32_t cluster = 0;
  std::uint32_t index_in_cluster = 0;
};

/// Names and grouping of every chain the election runs.
struct Topology {
  std::vector<std::string> cluster_ids;
  std::vector<CenterSpec> centers;  // cluster-major order
  /// Chain ids of levels 2 and above; one chain per level.
  std::vector<std::string> upper_ids;
};

Topology make_topology(const ElectionConfig& config);

using RegionMap = std::map<std::string, std::string, std::less<>>;

/// Per-box candidate lists: the candidates file if given, else the config
/// list for every box.
CandidateRegistry make_candidates(const ElectionConfig& config, const Topology& topology);

/// Ballot box -> region. Region is the cluster unless a region map file
/// (a JSON object of box -> region) overrides it.
RegionMap make_region_map(const ElectionConfig& config, const Topology& topology);

}  // namespace hbvote
