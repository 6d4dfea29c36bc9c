#include "hbvote/audit.hpp"

#include <algorithm>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "hbvote/run_dir.hpp"
#include "hbvote/sim.hpp"
#include "json.hpp"

namespace hbvote {

AuditContext AuditContext::from_config(const ElectionConfig& config) {
  auto topology = make_topology(config);
  return AuditContext{config.election_id, config.difficulty(), make_candidates(config, topology),
                      make_region_map(config, topology)};
}

namespace {

std::string code_of(Errc c) { return std::string(errc_name(c)); }

std::optional<HashDigest> try_hash(const auto& block) {
  try {
    return hash_of(block);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void collect_votes(const Lotb& lotb, std::vector<VoteBlock>& out) {
  out.insert(out.end(), lotb.votes.begin(), lotb.votes.end());
  for (const auto& b : lotb.batches) collect_votes(b.lotb, out);
}

}  // namespace

ChainAudit audit_chain_text(std::string_view text, const std::string& file, const AuditContext& context,
                            const std::optional<HashDigest>& anchor) {
  ParsedChain parsed = parse_chain(text);
  ChainAudit out;
  out.chain = std::move(parsed.chain);
  const Chain& chain = out.chain;
  auto add = [&](std::size_t index, Errc code, std::string detail) {
    out.findings.push_back(Finding{file, index + 1, code_of(code), std::move(detail)});
  };

  for (auto line : parsed.noncanonical_lines) {
    out.findings.push_back(Finding{file, line, "NonCanonicalEncoding", "line differs from the canonical encoding of its block"});
  }
  if (chain.election_id() != context.election_id) {
    add(0, Errc::ElectionMismatch, "chain belongs to election " + chain.election_id());
  }

  std::optional<HashDigest> prev = try_hash(chain.genesis());
  if (!prev) add(0, Errc::IllegalCharacter, "genesis cannot be hashed");
  ContinuityTracker continuity(chain.election_id());
  const std::size_t n = chain.size();
  for (std::size_t i = 1; i < n; ++i) {
    std::optional<Issue> issue;
    HashDigest link;
    std::vector<VoteBlock> votes;
    std::optional<HashDigest> own;
    // Unhashable content (a delimiter inside a field) surfaces as an Error.
    try {
      if (chain.level() == 0) {
        const auto& block = chain.votes()[i - 1];
        link = block.prev_hash;
        votes.push_back(block);
        own = try_hash(block);
        issue = check_block(block, context.election_id, context.difficulty);
      } else {
        const auto& block = chain.batches()[i - 1];
        link = block.prev_hash;
        collect_votes(block.lotb, votes);
        own = try_hash(block);
        issue = check_block(block, context.election_id, chain.level(), context.difficulty);
        if (auto gap = continuity.admit(block)) add(i, gap->code, gap->detail);
      }
    } catch (const Error& e) {
      issue = Issue{e.code(), e.what()};
    }
    if (issue) add(i, issue->code, issue->detail);
    if (prev && link != *prev) add(i, Errc::BrokenLink, "prev_hash does not match line " + std::to_string(i));
    for (const auto& v : votes) {
      if (context.regions.find(v.ballot_box_id) == context.regions.end()) {
        add(i, Errc::UnknownBallotBox, "vote for unknown ballot box " + v.ballot_box_id);
      } else if (!context.candidates.allows(v.ballot_box_id, v.candidate_id)) {
        add(i, Errc::UnknownCandidate, v.candidate_id + " is not on the ballot of " + v.ballot_box_id);
      }
    }
    out.votes.insert(out.votes.end(), votes.begin(), votes.end());
    prev = own;
  }
  if (anchor && prev != anchor) add(n - 1, Errc::AnchorMismatch, "tip digest differs from the published one");
  return out;
}

AuditReport audit_chain_file(const std::filesystem::path& path, const AuditContext& context) {
  auto result = audit_chain_text(read_file(path), path.filename().string(), context);
  AuditReport report;
  report.findings = std::move(result.findings);
  if (report.findings.empty()) report.tally = tally(result.votes, context.regions, context.candidates);
  return report;
}

// ---------------------------------------------------------------------------

RunAuditor::RunAuditor(const std::filesystem::path& run_dir) : dir_(run_dir) {
  config_ = load_config(dir_ / "config.txt");
  context_ = AuditContext::from_config(config_);
  auto published = read_run_report(dir_);
  published_ = std::move(published.tally);
  for (const auto& entry : published.chains) {
    FileState f;
    f.path = dir_ / entry.file;
    f.name = entry.file;
    f.level = entry.level;
    f.blocks = entry.blocks;
    f.tip = entry.tip;
    f.text = read_file(f.path);
    top_level_ = std::max(top_level_, f.level);
    files_.push_back(std::move(f));
  }
  for (auto& f : files_) examine(f, f.text);
}

void RunAuditor::examine(FileState& f, std::string_view text) const {
  f.findings.clear();
  f.votes.clear();
  f.counts.clear();
  f.parse_error = false;
  try {
    auto result = audit_chain_text(text, f.name, context_, f.tip);
    f.findings = std::move(result.findings);
    if (result.chain.level() != f.level) {
      f.findings.push_back(Finding{f.name, 1, code_of(Errc::LevelMismatch), "chain level differs from the published one"});
    }
    if (result.chain.size() != f.blocks) {
      f.findings.push_back(Finding{f.name, 0, "BlockCountMismatch",
                                   std::to_string(result.chain.size()) + " blocks, published " + std::to_string(f.blocks)});
    }
    for (const auto& v : result.votes) {
      if (auto h = try_hash(v)) ++f.votes[*h];
      auto region = context_.regions.find(v.ballot_box_id);
      if (region != context_.regions.end()) ++f.counts[region->second][v.candidate_id];
    }
  } catch (const ParseError& e) {
    f.parse_error = true;
    f.findings.push_back(Finding{f.name, e.line(), code_of(Errc::ParseError), e.reason()});
  }
}

AuditReport RunAuditor::combine(const std::vector<const FileState*>& files) const {
  AuditReport report;
  std::map<std::uint32_t, VoteCounts> per_level;
  RawCounts top_counts;
  for (const FileState* f : files) {
    report.findings.insert(report.findings.end(), f->findings.begin(), f->findings.end());
    report.parse_error = report.parse_error || f->parse_error;
    auto& level = per_level[f->level];
    for (const auto& [h, n] : f->votes) level[h] += n;
    if (f->level == top_level_) {
      for (const auto& [region, row] : f->counts) {
        for (const auto& [candidate, n] : row) top_counts[region][candidate] += n;
      }
    }
  }
  if (!per_level.empty()) {
    const auto& base = per_level.begin()->second;
    for (const auto& [level, votes] : per_level) {
      if (votes != base) {
        report.findings.push_back(Finding{"level" + std::to_string(level), 0, "VoteSetMismatch",
                                          "votes of level " + std::to_string(level) + " differ from level " +
                                              std::to_string(per_level.begin()->first)});
      }
    }
  }
  report.tally = tally_from_counts(top_counts, context_.regions, context_.candidates);
  if (published_ && report.tally != *published_) {
    report.findings.push_back(Finding{"report.json", 0, "TallyMismatch", "recomputed tally differs from the published one"});
  }
  return report;
}

AuditReport RunAuditor::audit() const {
  std::vector<const FileState*> all;
  for (const auto& f : files_) all.push_back(&f);
  return combine(all);
}

AuditReport RunAuditor::audit_with(std::size_t index, std::string_view text) const {
  FileState replaced = files_.at(index);
  replaced.text.clear();
  examine(replaced, text);
  std::vector<const FileState*> all;
  for (std::size_t i = 0; i < files_.size(); ++i) all.push_back(i == index ? &replaced : &files_[i]);
  return combine(all);
}

std::size_t TamperStats::detected() const {
  return static_cast<std::size_t>(std::count_if(mutations.begin(), mutations.end(), [](const Mutation& m) { return m.detected; }));
}

double TamperStats::rate() const {
  return mutations.empty() ? 1.0 : static_cast<double>(detected()) / static_cast<double>(mutations.size());
}

TamperStats tamper_experiment(const RunAuditor& auditor, std::size_t count, std::uint64_t seed) {
  TamperStats stats;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < auditor.file_count(); ++i) total += auditor.file_text(i).size();
  if (count == 0 || total == 0) return stats;
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t at = rng.below(total);
    std::size_t file = 0;
    while (at >= auditor.file_text(file).size()) at -= auditor.file_text(file++).size();
    std::string text = auditor.file_text(file);
    Mutation m{file, static_cast<std::size_t>(at), static_cast<unsigned char>(text[at]), 0, false};
    // Any of the 255 other byte values.
    m.after = static_cast<unsigned char>((m.before + 1 + rng.below(255)) % 256);
    text[at] = static_cast<char>(m.after);
    m.detected = !auditor.audit_with(file, text).ok();
    stats.mutations.push_back(m);
  }
  return stats;
}

std::string findings_json(const AuditReport& report) {
  nlohmann::ordered_json j;
  j["ok"] = report.ok();
  j["findings"] = nlohmann::ordered_json::array();
  for (const auto& f : report.findings) {
    j["findings"].push_back({{"file", f.file}, {"line", f.line}, {"code", f.code}, {"detail", f.detail}});
  }
  return j.dump(2) + "\n";
}

}  // namespace hbvote
