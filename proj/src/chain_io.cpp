#include "hbvote/chain_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hbvote {

using ojson = nlohmann::ordered_json;

namespace {

ojson encode(const VoteBlock& b) {
  ojson j;
  j["kind"] = "vote";
  j["election_id"] = b.election_id;
  j["ballot_box_id"] = b.ballot_box_id;
  j["candidate_id"] = b.candidate_id;
  j["prev_hash"] = b.prev_hash.hex();
  j["nonce"] = b.nonce;
  return j;
}

ojson encode(const BatchBlock& b) {
  ojson j;
  j["kind"] = "batch";
  j["election_id"] = b.election_id;
  j["level"] = b.level;
  j["round"] = b.round;
  j["prev_hash"] = b.prev_hash.hex();
  j["nonce"] = b.nonce ? ojson(*b.nonce) : ojson(nullptr);
  ojson children = ojson::array();
  for (const auto& v : b.lotb.votes) children.push_back(encode(v));
  for (const auto& c : b.lotb.batches) children.push_back(encode(c));
  j["lotb"] = std::move(children);
  return j;
}

ojson encode(const GenesisBlock& b) {
  ojson j;
  j["kind"] = "genesis";
  j["election_id"] = b.election_id;
  j["level"] = b.level;
  return j;
}

struct Decoder {
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line, what); }

  void expect_keys(const ojson& j, std::initializer_list<const char*> keys) const {
    if (!j.is_object()) fail("block is not an object");
    if (j.size() != keys.size()) fail("unexpected key set");
    for (const char* k : keys) {
      if (!j.contains(k)) fail(std::string("missing key '") + k + "'");
    }
  }

  std::string str(const ojson& j, const char* key) const {
    const auto& v = j.at(key);
    if (!v.is_string()) fail(std::string("'") + key + "' is not a string");
    return v.get<std::string>();
  }

  std::uint64_t uint(const ojson& j, const char* key) const {
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) fail(std::string("'") + key + "' is not an unsigned integer");
    return v.get<std::uint64_t>();
  }

  HashDigest digest(const ojson& j, const char* key) const {
    auto d = HashDigest::from_hex(str(j, key));
    if (!d) fail(std::string("'") + key + "' is not a 64-char lowercase hex digest");
    return *d;
  }

  std::string kind(const ojson& j) const {
    if (!j.is_object() || !j.contains("kind")) fail("block without 'kind'");
    return str(j, "kind");
  }

  GenesisBlock genesis(const ojson& j) const {
    expect_keys(j, {"kind", "election_id", "level"});
    if (kind(j) != "genesis") fail("first line must be the genesis block");
    auto level = uint(j, "level");
    if (level > 64) fail("level out of range");
    return GenesisBlock{str(j, "election_id"), static_cast<std::uint32_t>(level)};
  }

  VoteBlock vote(const ojson& j) const {
    expect_keys(j, {"kind", "election_id", "ballot_box_id", "candidate_id", "prev_hash", "nonce"});
    if (kind(j) != "vote") fail("expected a vote block");
    return VoteBlock{str(j, "election_id"), str(j, "ballot_box_id"), str(j, "candidate_id"),
                     digest(j, "prev_hash"), str(j, "nonce")};
  }

  BatchBlock batch(const ojson& j, std::uint32_t level) const {
    expect_keys(j, {"kind", "election_id", "level", "round", "prev_hash", "nonce", "lotb"});
    if (kind(j) != "batch") fail("expected a batch block");
    BatchBlock b;
    b.election_id = str(j, "election_id");
    auto parsed_level = uint(j, "level");
    if (parsed_level != level) fail("batch block level " + std::to_string(parsed_level) + " where " + std::to_string(level) + " belongs");
    b.level = level;
    b.round = uint(j, "round");
    b.prev_hash = digest(j, "prev_hash");
    if (!j.at("nonce").is_null()) b.nonce = str(j, "nonce");
    const auto& children = j.at("lotb");
    if (!children.is_array()) fail("'lotb' is not an array");
    for (const auto& c : children) {
      if (level == 1) {
        b.lotb.votes.push_back(vote(c));
      } else {
        b.lotb.batches.push_back(batch(c, level - 1));
      }
    }
    return b;
  }
};

ojson parse_line(std::string_view text, std::size_t line) {
  try {
    return ojson::parse(text.begin(), text.end());
  } catch (const ojson::exception& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace

std::string to_json_line(const GenesisBlock& block) { return encode(block).dump(); }
std::string to_json_line(const VoteBlock& block) { return encode(block).dump(); }
std::string to_json_line(const BatchBlock& block) { return encode(block).dump(); }

std::string serialize_chain(const Chain& chain) {
  std::string out = to_json_line(chain.genesis());
  out += '\n';
  for (const auto& v : chain.votes()) {
    out += to_json_line(v);
    out += '\n';
  }
  for (const auto& b : chain.batches()) {
    out += to_json_line(b);
    out += '\n';
  }
  return out;
}

ParsedChain parse_chain(std::string_view text) {
  if (text.empty()) throw ParseError(1, "empty chain file");

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }

  std::optional<ParsedChain> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) throw ParseError(line_no, "empty line");
    Decoder dec{line_no};
    ojson j = parse_line(lines[i], line_no);
    std::string canonical;
    try {
      if (i == 0) {
        auto g = dec.genesis(j);
        canonical = to_json_line(g);
        out.emplace(ParsedChain{Chain(g.election_id, g.level), {}});
      } else if (out->chain.level() == 0) {
        auto v = dec.vote(j);
        canonical = to_json_line(v);
        out->chain.push_unchecked(std::move(v));
      } else {
        auto b = dec.batch(j, out->chain.level());
        canonical = to_json_line(b);
        out->chain.push_unchecked(std::move(b));
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
    if (canonical != lines[i]) out->noncanonical_lines.push_back(line_no);
  }
  if (text.back() != '\n') out->noncanonical_lines.push_back(lines.size());
  return std::move(*out);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace hbvote
