#include "hbvote/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "json.hpp"

namespace hbvote {

namespace {

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

template <class T>
T parse_uint(std::string_view key, std::string_view value) {
  T out{};
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    invalid(std::string(key) + ": expected a non-negative integer, got '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  invalid(std::string(key) + ": expected true or false");
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto end = value.find(',', start);
    if (end == std::string_view::npos) end = value.size();
    auto item = trim(value.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

std::string padded(std::string_view prefix, std::size_t index, std::size_t count) {
  std::size_t width = std::max<std::size_t>(3, std::to_string(count > 0 ? count - 1 : 0).size());
  std::string digits = std::to_string(index);
  return std::string(prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < items.size(); ++i) ss << (i ? "," : "") << items[i];
  return ss.str();
}

}  // namespace

void ElectionConfig::validate() const {
  if (election_id.empty() || election_id.find_first_of("|,") != std::string::npos) invalid("election_id must be non-empty without '|' or ','");
  if (levels < 1) invalid("levels must be >= 1");
  if (clusters == 0) invalid("clusters must be positive");
  if (centers_per_cluster == 0) invalid("centers_per_cluster must be positive");
  if (voters == 0 && registry_file.empty()) invalid("voters must be positive");
  if (voters > kDeskScaleVoterLimit && !override_scale) {
    invalid("voters = " + std::to_string(voters) + " exceeds the desk-scale limit; pass --override-scale to run it anyway");
  }
  if (sync_interval_s == 0) invalid("sync_interval_s must be positive");
  if (pause_s == 0 || pause_s >= sync_interval_s) invalid("pause_s must be positive and shorter than sync_interval_s");
  if (latency_ms == 0) invalid("latency_ms must be positive");
  if (election_duration_s == 0) invalid("election_duration_s must be positive");
  if (retry_cap == 0) invalid("retry_cap must be positive");
  if (mining_budget == 0) invalid("mining_budget must be positive");
  if (delegates_per_cluster == 0) invalid("delegates_per_cluster must be positive");
  if (zero_bits.empty()) invalid("zero_bits needs at least the level-0 entry");
  for (auto bits : zero_bits) {
    if (bits > 32) invalid("zero_bits entries must be <= 32");
  }
  if (candidates_file.empty()) {
    if (candidates.empty()) invalid("candidates must not be empty");
    for (const auto& c : candidates) {
      if (c == kBlankCandidate || c.find_first_of("|,") != std::string::npos) invalid("illegal candidate id '" + c + "'");
    }
  }
}

std::filesystem::path ElectionConfig::resolve(const std::string& file) const {
  std::filesystem::path p(file);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ElectionConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ElectionConfig cfg;
  cfg.base_dir = base_dir;

  using Setter = std::function<void(std::string_view, std::string_view)>;
  const std::map<std::string_view, Setter> setters = {
      {"election_id", [&](auto, auto v) { cfg.election_id = v; }},
      {"levels", [&](auto k, auto v) { cfg.levels = parse_uint<std::uint32_t>(k, v); }},
      {"clusters", [&](auto k, auto v) { cfg.clusters = parse_uint<std::uint32_t>(k, v); }},
      {"centers_per_cluster", [&](auto k, auto v) { cfg.centers_per_cluster = parse_uint<std::uint32_t>(k, v); }},
      {"voters", [&](auto k, auto v) { cfg.voters = parse_uint<std::uint64_t>(k, v); }},
      {"sync_interval_s", [&](auto k, auto v) { cfg.sync_interval_s = parse_uint<std::uint64_t>(k, v); }},
      {"pause_s", [&](auto k, auto v) { cfg.pause_s = parse_uint<std::uint64_t>(k, v); }},
      {"latency_ms", [&](auto k, auto v) { cfg.latency_ms = parse_uint<std::uint64_t>(k, v); }},
      {"zero_bits",
       [&](auto k, auto v) {
         cfg.zero_bits.clear();
         for (const auto& item : split_list(v)) cfg.zero_bits.push_back(parse_uint<std::uint32_t>(k, item));
       }},
      {"election_duration_s", [&](auto k, auto v) { cfg.election_duration_s = parse_uint<std::uint64_t>(k, v); }},
      {"seed", [&](auto k, auto v) { cfg.seed = parse_uint<std::uint64_t>(k, v); }},
      {"retry_cap", [&](auto k, auto v) { cfg.retry_cap = parse_uint<std::uint32_t>(k, v); }},
      {"mining_budget", [&](auto k, auto v) { cfg.mining_budget = parse_uint<std::uint64_t>(k, v); }},
      {"delegates_per_cluster", [&](auto k, auto v) { cfg.delegates_per_cluster = parse_uint<std::uint32_t>(k, v); }},
      {"candidates", [&](auto, auto v) { cfg.candidates = split_list(v); }},
      {"candidates_file", [&](auto, auto v) { cfg.candidates_file = v; }},
      {"region_map_file", [&](auto, auto v) { cfg.region_map_file = v; }},
      {"registry_file", [&](auto, auto v) { cfg.registry_file = v; }},
      {"registry_salt", [&](auto, auto v) { cfg.registry_salt = v; }},
      {"override_scale", [&](auto k, auto v) { cfg.override_scale = parse_bool(k, v); }},
  };

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) invalid("line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) invalid("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    it->second(key, value);
  }
  return cfg;
}

ElectionConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    invalid("cannot read config " + path.string());
  }
  return parse_config(text, path.parent_path());
}

std::string format_config(const ElectionConfig& c) {
  std::ostringstream ss;
  ss << "election_id = " << c.election_id << '\n'
     << "levels = " << c.levels << '\n'
     << "clusters = " << c.clusters << '\n'
     << "centers_per_cluster = " << c.centers_per_cluster << '\n'
     << "voters = " << c.voters << '\n'
     << "sync_interval_s = " << c.sync_interval_s << '\n'
     << "pause_s = " << c.pause_s << '\n'
     << "latency_ms = " << c.latency_ms << '\n'
     << "zero_bits = " << join(c.zero_bits) << '\n'
     << "election_duration_s = " << c.election_duration_s << '\n'
     << "seed = " << c.seed << '\n'
     << "retry_cap = " << c.retry_cap << '\n'
     << "mining_budget = " << c.mining_budget << '\n'
     << "delegates_per_cluster = " << c.delegates_per_cluster << '\n'
     << "candidates = " << join(c.candidates) << '\n'
     << "candidates_file = " << c.candidates_file << '\n'
     << "region_map_file = " << c.region_map_file << '\n'
     << "registry_file = " << c.registry_file << '\n'
     << "registry_salt = " << c.registry_salt << '\n'
     << "override_scale = " << (c.override_scale ? "true" : "false") << '\n';
  return ss.str();
}

Topology make_topology(const ElectionConfig& config) {
  Topology t;
  const std::size_t n_centers = std::size_t{config.clusters} * config.centers_per_cluster;
  for (std::uint32_t c = 0; c < config.clusters; ++c) t.cluster_ids.push_back(padded("cluster-", c, config.clusters));
  for (std::uint32_t c = 0; c < config.clusters; ++c) {
    for (std::uint32_t k = 0; k < config.centers_per_cluster; ++k) {
      std::size_t g = std::size_t{c} * config.centers_per_cluster + k;
      t.centers.push_back(CenterSpec{padded("center-", g, n_centers), padded("box-", g, n_centers), c, k});
    }
  }
  for (std::uint32_t level = 2; level < config.levels; ++level) t.upper_ids.push_back("level" + std::to_string(level) + "-top");
  return t;
}

CandidateRegistry make_candidates(const ElectionConfig& config, const Topology& topology) {
  if (!config.candidates_file.empty()) {
    auto reg = CandidateRegistry::from_jsonl(read_file(config.resolve(config.candidates_file)));
    for (const auto& center : topology.centers) {
      if (!reg.has_ballot_box(center.ballot_box_id)) invalid("candidates file lacks " + center.ballot_box_id);
    }
    return reg;
  }
  CandidateRegistry reg;
  std::vector<Candidate> list;
  for (const auto& id : config.candidates) list.push_back(Candidate{id, id});
  for (const auto& center : topology.centers) reg.add_ballot_box(center.ballot_box_id, list);
  return reg;
}

RegionMap make_region_map(const ElectionConfig& config, const Topology& topology) {
  RegionMap map;
  for (const auto& center : topology.centers) map[center.ballot_box_id] = topology.cluster_ids[center.cluster];
  if (!config.region_map_file.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(config.resolve(config.region_map_file)));
    } catch (const nlohmann::json::exception& e) {
      invalid(std::string("region map: ") + e.what());
    }
    if (!j.is_object()) invalid("region map must be a JSON object of ballot box -> region");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_string()) invalid("region map values must be strings");
      auto found = map.find(it.key());
      if (found == map.end()) invalid("region map names unknown ballot box " + it.key());
      found->second = it.value().get<std::string>();
    }
  }
  return map;
}

}  // namespace hbvote
