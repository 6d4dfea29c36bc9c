#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hbvote/chain.hpp"
#include "hbvote/config.hpp"
#include "hbvote/registry.hpp"
#include "hbvote/tally.hpp"

namespace hbvote {

struct Finding {
  std::string file;
  std::size_t line = 0;  // 1-based; 0 for whole-file or cross-file findings
  std::string code;
  std::string detail;
};

struct AuditReport {
  std::vector<Finding> findings;
  TallyResult tally;
  bool parse_error = false;

  bool ok() const { return findings.empty(); }
};

/// The public parameters a third party needs: patterns, candidates, regions.
struct AuditContext {
  std::string election_id;
  Difficulty difficulty;
  CandidateRegistry candidates;
  RegionMap regions;

  static AuditContext from_config(const ElectionConfig& config);
};

struct ChainAudit {
  std::vector<Finding> findings;
  Chain chain{"-", 0};
  /// Every vote reachable from the chain, in chain-then-lotb order.
  std::vector<VoteBlock> votes;
};

/// Checks one exported chain: canonical encoding, links, patterns, lotb
/// children, continuity, the optional tip anchor, and that every vote names a
/// known box and one of its candidates. Throws ParseError.
ChainAudit audit_chain_text(std::string_view text, const std::string& file, const AuditContext& context,
                            const std::optional<HashDigest>& anchor = std::nullopt);

/// Single-file audit with the tally of its votes. Throws ParseError / Io.
AuditReport audit_chain_file(const std::filesystem::path& path, const AuditContext& context);

/// Audits a whole run directory against its published report: every chain
/// file anchored to its published tip, vote multisets equal across levels,
/// top-level tally equal to the published one. Per-file results are cached so
/// that audit_with() re-examines only the substituted file.
class RunAuditor {
 public:
  /// Throws Io / ConfigInvalid / ParseError for a missing or unreadable
  /// config.txt or report.json.
  explicit RunAuditor(const std::filesystem::path& run_dir);

  AuditReport audit() const;
  /// Audit as if chain file `index` contained `text`.
  AuditReport audit_with(std::size_t index, std::string_view text) const;

  std::size_t file_count() const { return files_.size(); }
  const std::filesystem::path& file_path(std::size_t index) const { return files_.at(index).path; }
  const std::string& file_text(std::size_t index) const { return files_.at(index).text; }
  const AuditContext& context() const { return context_; }
  const ElectionConfig& config() const { return config_; }

 private:
  using VoteCounts = std::unordered_map<HashDigest, std::int64_t>;
  using RawCounts = std::map<std::string, std::map<std::string, std::uint64_t>>;

  struct FileState {
    std::filesystem::path path;
    std::string name;  // relative to the run directory
    std::uint32_t level = 0;
    std::size_t blocks = 0;
    std::optional<HashDigest> tip;
    std::string text;
    // Cached result.
    std::vector<Finding> findings;
    bool parse_error = false;
    VoteCounts votes;
    RawCounts counts;
  };

  void examine(FileState& file, std::string_view text) const;
  AuditReport combine(const std::vector<const FileState*>& files) const;

  std::filesystem::path dir_;
  ElectionConfig config_;
  AuditContext context_;
  std::vector<FileState> files_;
  std::uint32_t top_level_ = 0;
  std::optional<TallyResult> published_;
};

struct Mutation {
  std::size_t file = 0;
  std::size_t offset = 0;
  unsigned char before = 0;
  unsigned char after = 0;
  bool detected = false;
};

struct TamperStats {
  std::vector<Mutation> mutations;

  std::size_t detected() const;
  /// 1.0 for zero mutations.
  double rate() const;
};

/// Applies `count` seeded single-byte mutations, each to a fresh copy of one
/// chain file (byte chosen uniformly over all exported bytes), and audits each.
TamperStats tamper_experiment(const RunAuditor& auditor, std::size_t count, std::uint64_t seed);

/// JSON rendering of findings: {"ok": bool, "findings": [{file, line, code, detail}]}.
std::string findings_json(const AuditReport& report);

}  // namespace hbvote
