#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbvote {

// Every failure the library reports through exceptions carries one of these.
enum class Errc {
  IllegalCharacter,
  MiningBudgetExceeded,
  BrokenLink,
  PatternViolation,
  LevelMismatch,
  ElectionMismatch,
  ChildLinkBroken,
  AnchorMismatch,
  UnknownVoter,
  WrongPassword,
  WrongStation,
  AlreadyVoted,
  VoteInProgress,
  TokenAlreadyConsumed,
  TokenExpired,
  UnknownBallotBox,
  UnknownCandidate,
  InvalidCandidate,
  VotingPaused,
  CenterDown,
  StaleAck,
  RoundAlreadyOpen,
  NotProposer,
  RetryCapExceeded,
  ConfigInvalid,
  UnknownEntity,
  InvalidChain,
  ParseError,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Raised by the chain-file parser; `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what), line_(line), reason_(what) {}

  std::size_t line() const noexcept { return line_; }
  /// The message without the code and line prefix.
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace hbvote
