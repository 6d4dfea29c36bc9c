#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hbvote/chain.hpp"

namespace hbvote {

// Chain file format: one block per line as compact JSON, keys in the fixed
// order kind, election_id, level, round, ballot_box_id, candidate_id,
// prev_hash, nonce, lotb (only the keys a block kind carries), "\n" endings.
// The first line is the genesis block.

std::string to_json_line(const GenesisBlock& block);
std::string to_json_line(const VoteBlock& block);
std::string to_json_line(const BatchBlock& block);

std::string serialize_chain(const Chain& chain);

struct ParsedChain {
  Chain chain;
  /// 1-based lines whose bytes differ from the canonical encoding of the
  /// block they decode to.
  std::vector<std::size_t> noncanonical_lines;
};

/// Throws ParseError with the offending 1-based line.
ParsedChain parse_chain(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace hbvote
