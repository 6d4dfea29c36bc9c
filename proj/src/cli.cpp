#include "hbvote/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "hbvote/audit.hpp"
#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "hbvote/run_dir.hpp"
#include "hbvote/sim.hpp"

namespace hbvote::cli {

namespace fs = std::filesystem;

namespace {

void print_tally(std::ostream& out, const TallyResult& tally) {
  for (const auto& [region, rt] : tally.regions) {
    out << region << ":";
    for (const auto& [candidate, n] : rt.counts) out << ' ' << candidate << '=' << n;
    out << (rt.tie() ? "  tie(" : "  winner ");
    for (std::size_t i = 0; i < rt.winners.size(); ++i) out << (i ? ", " : "") << rt.winners[i];
    out << (rt.tie() ? ")\n" : "\n");
  }
  out << "total " << tally.total << '\n';
}

void print_findings(std::ostream& out, const AuditReport& report) {
  for (const auto& f : report.findings) {
    out << f.file;
    if (f.line > 0) out << ':' << f.line;
    out << ": " << f.code << ": " << f.detail << '\n';
  }
}

bool has_exports(const fs::path& run_dir) {
  return fs::is_regular_file(run_dir / "report.json") && fs::is_regular_file(run_dir / "config.txt") &&
         fs::is_directory(run_dir / "chains");
}

}  // namespace

fs::path default_run_dir(const std::string& election_id, std::uint64_t seed) {
  const char* env = std::getenv("HBVOTE_OUT_DIR");
  fs::path base = env && *env ? fs::path(env) : fs::path("hbvote-runs");
  return base / (election_id + "-seed" + std::to_string(seed));
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  std::optional<Simulation> sim;
  try {
    ElectionConfig config = load_config(options.config);
    if (options.seed) config.seed = *options.seed;
    if (options.override_scale) config.override_scale = true;
    FaultScript faults;
    if (options.faults) faults = FaultScript::from_jsonl(read_file(*options.faults));
    sim.emplace(std::move(config), std::move(faults));
  } catch (const Error& e) {
    err << "hbvote run: " << e.what() << '\n';
    return kExitInput;
  }

  const auto& report = sim->run();
  const fs::path dir = options.out ? *options.out : default_run_dir(sim->config().election_id, sim->config().seed);
  try {
    write_run_directory(dir, *sim);
  } catch (const std::exception& e) {
    err << "hbvote run: cannot write " << dir.string() << ": " << e.what() << '\n';
    return kExitInput;
  }

  print_tally(out, report.tally);
  const auto& m = report.metrics;
  out << "votes cast " << m.votes_cast << " of " << m.voters << ", unserved " << m.unserved << ", paused rejections "
      << m.paused_rejections << '\n';
  out << "oracle " << (report.tally_matches_oracle() ? "matches" : "DIFFERS") << '\n';
  for (const auto& i : report.incidents) {
    out << "incident " << i.kind << (i.chain.empty() ? "" : " " + i.chain) << ": " << i.detail << '\n';
  }
  out << "run directory " << dir.string() << '\n';
  return report.incidents.empty() ? kExitOk : kExitIncidents;
}

int cmd_tally(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  if (!has_exports(run_dir)) {
    err << "hbvote tally: " << run_dir.string() << " holds no exported run\n";
    return kExitInput;
  }
  try {
    const auto context = AuditContext::from_config(load_config(run_dir / "config.txt"));
    const auto published = read_run_report(run_dir);
    std::uint32_t top = 0;
    for (const auto& c : published.chains) top = std::max(top, c.level);

    std::vector<VoteBlock> votes;
    std::vector<Finding> findings;
    for (const auto& c : published.chains) {
      if (c.level != top) continue;
      auto result = audit_chain_text(read_file(run_dir / c.file), c.file, context, c.tip);
      findings.insert(findings.end(), result.findings.begin(), result.findings.end());
      votes.insert(votes.end(), result.votes.begin(), result.votes.end());
    }
    if (!findings.empty()) {
      print_findings(err, AuditReport{findings, {}, false});
      return kExitFindings;
    }
    auto result = tally(votes, context.regions, context.candidates);
    print_tally(out, result);
    if (published.tally && *published.tally != result) {
      err << "hbvote tally: recomputed tally differs from report.json\n";
      return kExitFindings;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "hbvote tally: " << e.what() << '\n';
    return kExitInput;
  }
}

int cmd_audit(const fs::path& target, const std::optional<fs::path>& config,
              const std::optional<fs::path>& findings_file, std::ostream& out, std::ostream& err) {
  AuditReport report;
  try {
    if (fs::is_directory(target)) {
      if (!has_exports(target)) {
        err << "hbvote audit: " << target.string() << " holds no exported run\n";
        return kExitInput;
      }
      report = RunAuditor(target).audit();
    } else {
      if (!fs::is_regular_file(target)) {
        err << "hbvote audit: no such file " << target.string() << '\n';
        return kExitInput;
      }
      // chains/level<k>/<id>.jsonl inside a run directory
      const fs::path run_dir = fs::absolute(target).parent_path().parent_path().parent_path();
      fs::path config_path = config ? *config : run_dir / "config.txt";
      const auto context = AuditContext::from_config(load_config(config_path));
      std::optional<HashDigest> anchor;
      if (!config && fs::is_regular_file(run_dir / "report.json")) {
        const auto rel = fs::relative(fs::absolute(target), run_dir).generic_string();
        for (const auto& c : read_run_report(run_dir).chains) {
          if (c.file == rel) anchor = c.tip;
        }
      }
      auto result = audit_chain_text(read_file(target), target.filename().string(), context, anchor);
      report.findings = std::move(result.findings);
      if (report.findings.empty()) report.tally = tally(result.votes, context.regions, context.candidates);
    }
  } catch (const ParseError& e) {
    report.findings.push_back(Finding{target.filename().string(), e.line(), "ParseError", e.reason()});
    report.parse_error = true;
  } catch (const Error& e) {
    err << "hbvote audit: " << e.what() << '\n';
    return kExitInput;
  }

  if (findings_file) {
    try {
      write_file_atomic(*findings_file, findings_json(report));
    } catch (const Error& e) {
      err << "hbvote audit: " << e.what() << '\n';
    }
  }
  if (report.parse_error) {
    print_findings(out, report);
    return kExitInput;
  }
  if (!report.ok()) {
    print_findings(out, report);
    out << report.findings.size() << " findings\n";
    return kExitFindings;
  }
  print_tally(out, report.tally);
  out << "ok\n";
  return kExitOk;
}

int cmd_tamper(const fs::path& run_dir, std::size_t mutations, std::uint64_t seed, std::ostream& out,
               std::ostream& err) {
  if (!has_exports(run_dir)) {
    err << "hbvote tamper: " << run_dir.string() << " holds no exported run\n";
    return kExitInput;
  }
  try {
    RunAuditor auditor(run_dir);
    if (auditor.file_count() == 0) {
      err << "hbvote tamper: no chain files listed in report.json\n";
      return kExitInput;
    }
    if (!auditor.audit().ok()) err << "hbvote tamper: warning: the unmodified exports already have findings\n";
    auto stats = tamper_experiment(auditor, mutations, seed);
    for (const auto& m : stats.mutations) {
      if (m.detected) continue;
      out << "missed: " << auditor.file_path(m.file).string() << " byte " << m.offset << '\n';
    }
    out << "mutations " << stats.mutations.size() << ", detected " << stats.detected() << ", rate " << std::fixed
        << std::setprecision(2) << stats.rate() * 100.0 << "%\n";
    return stats.detected() == stats.mutations.size() ? kExitOk : kExitFindings;
  } catch (const Error& e) {
    err << "hbvote tamper: " << e.what() << '\n';
    return kExitInput;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical blockchain e-voting simulator and audit toolkit"};
  app.require_subcommand(1);

  RunOptions run;
  std::string faults_path, out_path;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "simulate an election day and export the run directory");
  run_cmd->add_option("--config", run.config, "config file (key = value lines)")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "overrides the config seed");
  run_cmd->add_option("--faults", faults_path, "fault script (JSON lines)");
  run_cmd->add_option("--out", out_path, "run directory (default $HBVOTE_OUT_DIR/<election>-seed<seed>)");
  run_cmd->add_flag("--override-scale", run.override_scale, "allow more than 1,000,000 voters");

  std::string tally_dir;
  auto* tally_cmd = app.add_subcommand("tally", "recount the top-level chains of a run directory");
  tally_cmd->add_option("run_dir", tally_dir)->required();

  std::string audit_target, audit_config, audit_findings;
  auto* audit_cmd = app.add_subcommand("audit", "audit a run directory or a single chain file");
  audit_cmd->add_option("target", audit_target, "run directory or chain file")->required();
  audit_cmd->add_option("--config", audit_config, "public election config for a single chain file");
  audit_cmd->add_option("--findings", audit_findings, "write findings as JSON to this file");

  std::string tamper_dir;
  std::size_t tamper_n = 1000;
  std::uint64_t tamper_seed = 42;
  auto* tamper_cmd = app.add_subcommand("tamper", "mutate copies of the exports and measure audit detection");
  tamper_cmd->add_option("run_dir", tamper_dir)->required();
  tamper_cmd->add_option("-n,--mutations", tamper_n, "number of single-byte mutations")->capture_default_str();
  tamper_cmd->add_option("--seed", tamper_seed, "mutation seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = seed;
    if (!faults_path.empty()) run.faults = faults_path;
    if (!out_path.empty()) run.out = out_path;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (*tally_cmd) return cmd_tally(tally_dir, std::cout, std::cerr);
  if (*audit_cmd) {
    std::optional<fs::path> config, findings;
    if (!audit_config.empty()) config = audit_config;
    if (!audit_findings.empty()) findings = audit_findings;
    return cmd_audit(audit_target, config, findings, std::cout, std::cerr);
  }
  return cmd_tamper(tamper_dir, tamper_n, tamper_seed, std::cout, std::cerr);
}

}  // namespace hbvote::cli
