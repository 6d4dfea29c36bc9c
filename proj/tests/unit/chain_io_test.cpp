#include <gtest/gtest.h>

#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "support.hpp"

using namespace hbvote;
using hbvote::testing::mined_vote_chain;
using hbvote::testing::TempDir;

namespace {

std::size_t parse_error_line(std::string_view text) {
  try {
    parse_chain(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

Chain two_level_chain() {
  const Difficulty difficulty = Difficulty::level0(4);
  Chain box = mined_vote_chain(4, 4);
  Chain level1("E1", 1);
  BatchBlock b{"E1", 1, 0, level1.tip_hash(), {}, std::nullopt};
  b.lotb.votes = box.votes();
  return append(level1, b, difficulty);
}

}  // namespace

TEST(ChainIo, FixedKeyOrder) {
  EXPECT_EQ(to_json_line(GenesisBlock{"E1", 0}), R"({"kind":"genesis","election_id":"E1","level":0})");
  VoteBlock v{"E1", "box-1", "A", hash_of(GenesisBlock{"E1", 0}), "12"};
  EXPECT_EQ(to_json_line(v), R"({"kind":"vote","election_id":"E1","ballot_box_id":"box-1","candidate_id":"A","prev_hash":")" +
                                 v.prev_hash.hex() + R"(","nonce":"12"})");
  BatchBlock b{"E1", 1, 3, hash_of(GenesisBlock{"E1", 1}), {}, std::nullopt};
  EXPECT_EQ(to_json_line(b), R"({"kind":"batch","election_id":"E1","level":1,"round":3,"prev_hash":")" +
                                 b.prev_hash.hex() + R"(","nonce":null,"lotb":[]})");
}

TEST(ChainIo, RoundTripLevel0) {
  const Chain chain = mined_vote_chain(12);
  const std::string text = serialize_chain(chain);
  auto parsed = parse_chain(text);
  EXPECT_EQ(parsed.chain, chain);
  EXPECT_TRUE(parsed.noncanonical_lines.empty());
  EXPECT_EQ(serialize_chain(parsed.chain), text);
  EXPECT_EQ(validate_chain(parsed.chain, Difficulty::level0(8)).ok(), validate_chain(chain, Difficulty::level0(8)).ok());
}

TEST(ChainIo, RoundTripUpperLevels) {
  Chain level1 = two_level_chain();
  auto parsed = parse_chain(serialize_chain(level1));
  EXPECT_EQ(parsed.chain, level1);

  Chain level2("E1", 2);
  BatchBlock top{"E1", 2, 0, level2.tip_hash(), {}, std::nullopt};
  top.lotb.batches = level1.batches();
  level2.push_unchecked(top);
  auto parsed2 = parse_chain(serialize_chain(level2));
  EXPECT_EQ(parsed2.chain, level2);
  EXPECT_TRUE(validate_chain(parsed2.chain, Difficulty::level0(4)).ok());
}

TEST(ChainIo, EmptyInputIsLineOne) { EXPECT_EQ(parse_error_line(""), 1u); }

TEST(ChainIo, ParseErrorsPointAtTheLine) {
  const std::string text = serialize_chain(mined_vote_chain(4));
  auto line_start = [&](int n) {
    std::size_t pos = 0;
    for (int i = 1; i < n; ++i) pos = text.find('\n', pos) + 1;
    return pos;
  };

  std::string broken = text;
  broken.insert(line_start(3), "x");
  EXPECT_EQ(parse_error_line(broken), 3u);

  std::string upper = text;
  auto at = upper.find("\"prev_hash\":\"", line_start(2)) + 13;
  while (!std::isalpha(static_cast<unsigned char>(upper[at]))) ++at;
  upper[at] = static_cast<char>(std::toupper(static_cast<unsigned char>(upper[at])));
  EXPECT_EQ(parse_error_line(upper), 2u);

  std::string extra = text;
  extra.insert(line_start(4) + 1, R"("voter_id":"v1",)");
  EXPECT_EQ(parse_error_line(extra), 4u);

  std::string missing = text;
  auto nonce = missing.find(",\"nonce\"", line_start(2));
  missing.erase(nonce, missing.find('}', nonce) - nonce);
  EXPECT_EQ(parse_error_line(missing), 2u);

  EXPECT_EQ(parse_error_line(text + "\n"), 6u);
  EXPECT_EQ(parse_error_line(text.substr(line_start(2))), 1u);
}

TEST(ChainIo, BatchLevelMustMatchTheChain) {
  std::string text = serialize_chain(two_level_chain());
  auto pos = text.find("\"level\":1,\"round\"");
  text.replace(pos, 9, "\"level\":2");
  EXPECT_EQ(parse_error_line(text), 2u);
}

TEST(ChainIo, NonCanonicalLinesAreReported) {
  const std::string text = serialize_chain(mined_vote_chain(3));
  std::string spaced = text;
  spaced.insert(spaced.find(",\"ballot_box_id\"") + 1, " ");
  auto parsed = parse_chain(spaced);
  EXPECT_EQ(parsed.noncanonical_lines, std::vector<std::size_t>{2});
  EXPECT_EQ(parsed.chain, parse_chain(text).chain);

  auto unterminated = parse_chain(text.substr(0, text.size() - 1));
  EXPECT_EQ(unterminated.noncanonical_lines, std::vector<std::size_t>{4});
}

TEST(ChainIo, AtomicWriteAndRead) {
  TempDir dir("io");
  const auto path = dir / "chain.jsonl";
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  EXPECT_EQ(read_file(path), "second\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "chain.jsonl.tmp"));
  try {
    read_file(dir / "absent");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}
