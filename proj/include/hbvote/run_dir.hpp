#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hbvote/digest.hpp"
#include "hbvote/sim.hpp"
#include "hbvote/tally.hpp"
#include "json.hpp"

namespace hbvote {

/// Run directory layout:
///   config.txt                 resolved config snapshot
///   inputs/                    copies of the candidates and region map files
///   chains/level<k>/<id>.jsonl one exported chain per file
///   rounds.jsonl               one line per sync attempt
///   report.json                tallies, metrics, incidents, published tips
///   metadata.json              wall-clock timestamp (the only varying file)
///   counts/<id>.count          accepted counts of the voting centers
struct ChainEntry {
  std::uint32_t level = 0;
  std::string id;
  std::string file;  // relative to the run directory
  std::size_t blocks = 0;
  std::optional<HashDigest> tip;
};

struct PublishedReport {
  std::vector<ChainEntry> chains;
  std::optional<TallyResult> tally;
};

nlohmann::ordered_json tally_to_json(const TallyResult& tally);
/// Throws ParseError(1) on a malformed object.
TallyResult tally_from_json(const nlohmann::json& j);

std::string round_log_jsonl(const std::vector<RoundLogEntry>& log);
std::string report_json(const Simulation& sim, const std::vector<ChainEntry>& chains);

/// Exports the finished simulation. Files are written atomically; existing
/// files of a previous run are replaced.
void write_run_directory(const std::filesystem::path& dir, Simulation& sim);

/// Reads report.json. Throws Io / ParseError.
PublishedReport read_run_report(const std::filesystem::path& dir);

}  // namespace hbvote
