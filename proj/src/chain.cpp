#include "hbvote/chain.hpp"

#include <algorithm>
#include <charconv>

namespace hbvote {

namespace {

void require_plain(std::string_view field, std::string_view value) {
  if (value.find_first_of("|,") != std::string_view::npos) {
    throw Error(Errc::IllegalCharacter, std::string(field) + " contains a delimiter");
  }
}

bool is_decimal(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string vote_prefix(const VoteBlock& b) {
  require_plain("election_id", b.election_id);
  require_plain("ballot_box_id", b.ballot_box_id);
  require_plain("candidate_id", b.candidate_id);
  std::string out;
  out.reserve(16 + b.election_id.size() + b.ballot_box_id.size() + b.candidate_id.size() + 64);
  out += "V|";
  out += b.election_id;
  out += '|';
  out += b.ballot_box_id;
  out += '|';
  out += b.candidate_id;
  out += '|';
  out += b.prev_hash.hex();
  out += '|';
  return out;
}

std::string batch_prefix(const BatchBlock& b) {
  require_plain("election_id", b.election_id);
  std::string out = "B|";
  out += b.election_id;
  out += '|';
  out += std::to_string(b.level);
  out += '|';
  out += std::to_string(b.round);
  out += '|';
  out += b.prev_hash.hex();
  out += '|';
  out += joined_child_hashes(b.lotb);
  out += '|';
  return out;
}

std::string search_nonce(std::string prefix, DifficultyPattern pattern, std::uint64_t budget) {
  const std::size_t base = prefix.size();
  char digits[24];
  for (std::uint64_t n = 0; n < budget; ++n) {
    auto [end, ec] = std::to_chars(digits, digits + sizeof(digits), n);
    prefix.resize(base);
    prefix.append(digits, end);
    if (matches_pattern(sha256(prefix), pattern)) return std::string(digits, end);
  }
  throw Error(Errc::MiningBudgetExceeded,
              "no nonce within " + std::to_string(budget) + " attempts at " +
                  std::to_string(pattern.zero_bits) + " zero bits");
}

}  // namespace

Difficulty::Difficulty(std::vector<std::uint32_t> bits_per_level) : bits_(std::move(bits_per_level)) {}

bool operator==(const Lotb& a, const Lotb& b) { return a.votes == b.votes && a.batches == b.batches; }

std::string canonical_bytes(const GenesisBlock& block) {
  require_plain("election_id", block.election_id);
  return "G|" + block.election_id + "|" + std::to_string(block.level);
}

std::string canonical_bytes(const VoteBlock& block) {
  require_plain("nonce", block.nonce);
  return vote_prefix(block) + block.nonce;
}

std::string canonical_bytes(const BatchBlock& block) {
  std::string out = batch_prefix(block);
  if (block.nonce) {
    require_plain("nonce", *block.nonce);
    out += *block.nonce;
  }
  return out;
}

HashDigest hash_of(const GenesisBlock& block) { return sha256(canonical_bytes(block)); }
HashDigest hash_of(const VoteBlock& block) { return sha256(canonical_bytes(block)); }
HashDigest hash_of(const BatchBlock& block) { return sha256(canonical_bytes(block)); }

bool matches_pattern(const HashDigest& digest, DifficultyPattern pattern) {
  std::uint32_t remaining = std::min<std::uint32_t>(pattern.zero_bits, 256);
  for (std::uint8_t byte : digest.bytes) {
    if (remaining == 0) return true;
    if (remaining >= 8) {
      if (byte != 0) return false;
      remaining -= 8;
    } else {
      return (byte >> (8 - remaining)) == 0;
    }
  }
  return true;
}

std::string mine(const VoteBlock& draft, DifficultyPattern pattern, std::uint64_t budget) {
  return search_nonce(vote_prefix(draft), pattern, budget);
}

std::string mine(const BatchBlock& draft, DifficultyPattern pattern, std::uint64_t budget) {
  return search_nonce(batch_prefix(draft), pattern, budget);
}

std::string joined_child_hashes(const Lotb& lotb) {
  std::string out;
  out.reserve(lotb.size() * 65);
  auto add = [&out](const HashDigest& d) {
    if (!out.empty()) out += ',';
    out += d.hex();
  };
  for (const auto& v : lotb.votes) add(hash_of(v));
  for (const auto& b : lotb.batches) add(hash_of(b));
  return out;
}

// ---------------------------------------------------------------------------

Chain::Chain(std::string election_id, std::uint32_t level)
    : genesis_{std::move(election_id), level} {
  require_plain("election_id", genesis_.election_id);
}

HashDigest Chain::hash_at(std::size_t index) const {
  if (index == 0) return hash_of(genesis_);
  if (index > body_.size()) throw std::out_of_range("chain index");
  return level() == 0 ? hash_of(body_.votes[index - 1]) : hash_of(body_.batches[index - 1]);
}

namespace {

[[noreturn]] void raise(const Issue& issue) { throw Error(issue.code, issue.detail); }

}  // namespace

Chain append(Chain chain, VoteBlock block, const Difficulty& difficulty) {
  if (chain.level() != 0) throw Error(Errc::LevelMismatch, "vote block on a level-" + std::to_string(chain.level()) + " chain");
  if (block.prev_hash != chain.tip_hash()) throw Error(Errc::BrokenLink, "prev_hash does not match chain tip");
  if (auto issue = check_block(block, chain.election_id(), difficulty)) raise(*issue);
  chain.push_unchecked(std::move(block));
  return chain;
}

Chain append(Chain chain, BatchBlock block, const Difficulty& difficulty) {
  if (chain.level() == 0 || block.level != chain.level()) {
    throw Error(Errc::LevelMismatch, "batch block of level " + std::to_string(block.level) +
                                         " on a level-" + std::to_string(chain.level()) + " chain");
  }
  if (block.prev_hash != chain.tip_hash()) throw Error(Errc::BrokenLink, "prev_hash does not match chain tip");
  if (auto issue = check_block(block, chain.election_id(), chain.level(), difficulty)) raise(*issue);
  chain.push_unchecked(std::move(block));
  return chain;
}

// ---------------------------------------------------------------------------

std::optional<Issue> check_block(const VoteBlock& block, std::string_view election_id,
                                 const Difficulty& difficulty) {
  if (block.election_id != election_id) return Issue{Errc::ElectionMismatch, "vote for election '" + block.election_id + "'"};
  if (!is_decimal(block.nonce)) return Issue{Errc::IllegalCharacter, "nonce is not a decimal integer"};
  if (block.ballot_box_id.empty() || block.candidate_id.empty()) return Issue{Errc::IllegalCharacter, "empty vote field"};
  HashDigest digest;
  try {
    digest = hash_of(block);
  } catch (const Error& e) {
    return Issue{e.code(), e.what()};
  }
  if (!matches_pattern(digest, difficulty.at(0))) return Issue{Errc::PatternViolation, "vote hash " + digest.hex() + " misses the level-0 pattern"};
  return std::nullopt;
}

std::optional<Issue> check_block(const BatchBlock& block, std::string_view election_id, std::uint32_t level,
                                 const Difficulty& difficulty) {
  if (block.election_id != election_id) return Issue{Errc::ElectionMismatch, "batch for election '" + block.election_id + "'"};
  if (block.level != level || level == 0) return Issue{Errc::LevelMismatch, "batch block at level " + std::to_string(block.level) + ", expected " + std::to_string(level)};
  if (block.nonce && !is_decimal(*block.nonce)) return Issue{Errc::IllegalCharacter, "nonce is not a decimal integer"};
  if (level == 1 && !block.lotb.batches.empty()) return Issue{Errc::LevelMismatch, "level-1 batch holds batch children"};
  if (level > 1 && !block.lotb.votes.empty()) return Issue{Errc::LevelMismatch, "vote children above level 1"};

  for (const auto& v : block.lotb.votes) {
    if (auto issue = check_block(v, election_id, difficulty)) return issue;
  }
  for (const auto& b : block.lotb.batches) {
    if (auto issue = check_block(b, election_id, level - 1, difficulty)) return issue;
  }

  const DifficultyPattern pattern = difficulty.at(level);
  if (pattern.zero_bits > 0) {
    if (!block.nonce) return Issue{Errc::PatternViolation, "unmined batch block on a mined level"};
    HashDigest digest;
    try {
      digest = hash_of(block);
    } catch (const Error& e) {
      return Issue{e.code(), e.what()};
    }
    if (!matches_pattern(digest, pattern)) return Issue{Errc::PatternViolation, "batch hash misses the level pattern"};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

ContinuityTracker::ContinuityTracker(std::string election_id) : election_id_(std::move(election_id)) {}

const HashDigest& ContinuityTracker::genesis_hash(std::uint32_t level) const {
  auto it = genesis_hashes_.find(level);
  if (it == genesis_hashes_.end()) {
    it = genesis_hashes_.emplace(level, hash_of(GenesisBlock{election_id_, level})).first;
  }
  return it->second;
}

std::optional<Issue> ContinuityTracker::walk(const Lotb& lotb, std::uint32_t child_level, State& state) const {
  for (const auto& v : lotb.votes) {
    auto [it, fresh] = state.box_tips.try_emplace(v.ballot_box_id, genesis_hash(0));
    if (v.prev_hash != it->second) {
      return Issue{Errc::ChildLinkBroken, "vote of " + v.ballot_box_id + " does not continue its chain"};
    }
    it->second = hash_of(v);
  }
  for (const auto& b : lotb.batches) {
    auto& tips = state.batch_tips[child_level];
    if (auto it = tips.find(b.prev_hash); it != tips.end()) {
      tips.erase(it);
    } else if (b.prev_hash != genesis_hash(child_level)) {
      return Issue{Errc::ChildLinkBroken, "level-" + std::to_string(child_level) + " batch continues no known chain"};
    }
    tips.insert(hash_of(b));
    if (auto issue = walk(b.lotb, child_level - 1, state)) return issue;
  }
  return std::nullopt;
}

std::optional<Issue> ContinuityTracker::admit(const BatchBlock& block) {
  State next = state_;
  if (auto issue = walk(block.lotb, block.level - 1, next)) return issue;
  state_ = std::move(next);
  return std::nullopt;
}

ChainVerdict validate_chain(const Chain& chain, const Difficulty& difficulty, const std::optional<HashDigest>& anchor) {
  auto fail = [](std::size_t index, Errc reason, std::string detail) {
    return ChainVerdict{ValidationFailure{index, reason, std::move(detail)}};
  };

  HashDigest prev;
  try {
    prev = hash_of(chain.genesis());
  } catch (const Error& e) {
    return fail(0, e.code(), e.what());
  }

  ContinuityTracker continuity(chain.election_id());
  const std::size_t n = chain.size();
  for (std::size_t i = 1; i < n; ++i) {
    std::optional<Issue> issue;
    HashDigest prev_link;
    if (chain.level() == 0) {
      const auto& block = chain.votes()[i - 1];
      issue = check_block(block, chain.election_id(), difficulty);
      prev_link = block.prev_hash;
    } else {
      const auto& block = chain.batches()[i - 1];
      issue = check_block(block, chain.election_id(), chain.level(), difficulty);
      prev_link = block.prev_hash;
      if (!issue) issue = continuity.admit(block);
    }
    if (issue) return fail(i, issue->code, issue->detail);
    if (prev_link != prev) return fail(i, Errc::BrokenLink, "prev_hash does not match block " + std::to_string(i - 1));
    prev = chain.hash_at(i);
  }
  if (anchor && *anchor != prev) return fail(n - 1, Errc::AnchorMismatch, "tip digest differs from the published anchor");
  return {};
}

}  // namespace hbvote
