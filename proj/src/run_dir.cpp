#include "hbvote/run_dir.hpp"

#include <chrono>
#include <ctime>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"

namespace hbvote {

using nlohmann::ordered_json;

ordered_json tally_to_json(const TallyResult& tally) {
  ordered_json regions = ordered_json::object();
  for (const auto& [region, rt] : tally.regions) {
    ordered_json counts = ordered_json::object();
    for (const auto& [candidate, n] : rt.counts) counts[candidate] = n;
    regions[region] = {{"counts", counts}, {"winners", rt.winners}, {"tie", rt.tie()}};
  }
  return {{"total", tally.total}, {"regions", regions}};
}

TallyResult tally_from_json(const nlohmann::json& j) {
  try {
    TallyResult out;
    out.total = j.at("total").get<std::uint64_t>();
    for (const auto& [region, rt] : j.at("regions").items()) {
      auto& dst = out.regions[region];
      for (const auto& [candidate, n] : rt.at("counts").items()) dst.counts[candidate] = n.get<std::uint64_t>();
      dst.winners = rt.at("winners").get<std::vector<std::string>>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("tally: ") + e.what());
  }
}

std::string round_log_jsonl(const std::vector<RoundLogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    ordered_json sizes = ordered_json::object();
    for (const auto& [source, n] : e.batch_sizes) sizes[source] = n;
    ordered_json j = {
        {"time_ms", e.time_ms},
        {"level", e.upper_level},
        {"cluster", e.cluster},
        {"round", e.round},
        {"flag", e.flag == AckFlag::Accept ? "accept" : "decline"},
        {"batch_sizes", sizes},
        {"retries", e.retries},
        {"approvals", e.approvals},
        {"duration_ms", e.duration_ms},
        {"drain", e.drain},
    };
    if (!e.reason.empty()) j["reason"] = e.reason;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string report_json(const Simulation& sim, const std::vector<ChainEntry>& chains) {
  const auto& r = sim.report();
  const auto& m = r.metrics;
  ordered_json rounds = ordered_json::object();
  for (const auto& [chain, s] : m.rounds) {
    rounds[chain] = {{"scheduled", s.scheduled},
                     {"drain", s.drain},
                     {"attempts", s.attempts},
                     {"declines", s.declines},
                     {"retry_cap_exceeded", s.retry_cap_exceeded}};
  }
  ordered_json incidents = ordered_json::array();
  for (const auto& i : r.incidents) {
    incidents.push_back({{"kind", i.kind}, {"chain", i.chain}, {"round", i.round}, {"time_ms", i.time_ms}, {"detail", i.detail}});
  }
  ordered_json chain_list = ordered_json::array();
  for (const auto& c : chains) {
    chain_list.push_back({{"level", c.level}, {"id", c.id}, {"file", c.file}, {"blocks", c.blocks}, {"tip", c.tip ? c.tip->hex() : ""}});
  }
  ordered_json j = {
      {"election_id", sim.config().election_id},
      {"seed", sim.config().seed},
      {"tally_matches_oracle", r.tally_matches_oracle()},
      {"tally", tally_to_json(r.tally)},
      {"oracle", tally_to_json(r.oracle)},
      {"level0_tally", tally_to_json(r.level0_tally)},
      {"metrics",
       {{"voters", m.voters},
        {"votes_cast", m.votes_cast},
        {"paused_rejections", m.paused_rejections},
        {"unserved", m.unserved},
        {"reassigned", m.reassigned},
        {"end_time_ms", m.end_time_ms},
        {"votes_committed_per_level", m.votes_committed_per_level},
        {"rounds", rounds}}},
      {"incidents", incidents},
      {"chains", chain_list},
  };
  return j.dump(2) + "\n";
}

void write_run_directory(const std::filesystem::path& dir, Simulation& sim) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "chains");

  ElectionConfig snapshot = sim.config();
  auto copy_input = [&](std::string& field, const char* name) {
    if (field.empty()) return;
    fs::create_directories(dir / "inputs");
    write_file_atomic(dir / "inputs" / name, read_file(snapshot.resolve(field)));
    field = std::string("inputs/") + name;
  };
  copy_input(snapshot.candidates_file, "candidates.jsonl");
  copy_input(snapshot.region_map_file, "region_map.json");
  // The voter roll is private and stays out of the run directory.
  snapshot.registry_file.clear();
  snapshot.voters = sim.credentials().size();
  write_file_atomic(dir / "config.txt", format_config(snapshot));

  std::vector<ChainEntry> entries;
  auto export_chain = [&](const std::string& id, const Chain& chain) {
    std::string rel = "chains/level" + std::to_string(chain.level()) + "/" + id + ".jsonl";
    fs::create_directories((dir / rel).parent_path());
    write_file_atomic(dir / rel, serialize_chain(chain));
    std::optional<HashDigest> tip;
    try {
      tip = chain.tip_hash();
    } catch (const Error&) {
    }
    entries.push_back(ChainEntry{chain.level(), id, rel, chain.size(), tip});
  };
  for (const auto& c : sim.centers()) export_chain(c.node_id(), c.chain());
  for (const auto& level : sim.uppers()) {
    for (const auto& u : level) export_chain(u.chain_id(), u.chain());
  }

  fs::create_directories(dir / "counts");
  for (const auto& c : sim.centers()) {
    write_file_atomic(dir / "counts" / (c.node_id() + ".count"), std::to_string(c.accepted_count()) + "\n");
  }
  for (const auto& level : sim.uppers()) {
    for (const auto& u : level) {
      write_file_atomic(dir / "counts" / (u.chain_id() + ".count"), std::to_string(u.accepted_count()) + "\n");
    }
  }

  write_file_atomic(dir / "rounds.jsonl", round_log_jsonl(sim.report().round_log));
  write_file_atomic(dir / "report.json", report_json(sim, entries));

  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  write_file_atomic(dir / "metadata.json", ordered_json{{"timestamp", stamp}}.dump(2) + "\n");
}

PublishedReport read_run_report(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / "report.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("report.json: ") + e.what());
  }
  PublishedReport out;
  try {
    for (const auto& c : j.at("chains")) {
      ChainEntry e;
      e.level = c.at("level").get<std::uint32_t>();
      e.id = c.at("id").get<std::string>();
      e.file = c.at("file").get<std::string>();
      e.blocks = c.at("blocks").get<std::size_t>();
      e.tip = HashDigest::from_hex(c.at("tip").get<std::string>());
      out.chains.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("report.json: ") + e.what());
  }
  if (j.contains("tally")) out.tally = tally_from_json(j.at("tally"));
  return out;
}

}  // namespace hbvote
