#include "hbvote/error.hpp"

namespace hbvote {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::IllegalCharacter: return "IllegalCharacter";
    case Errc::MiningBudgetExceeded: return "MiningBudgetExceeded";
    case Errc::BrokenLink: return "BrokenLink";
    case Errc::PatternViolation: return "PatternViolation";
    case Errc::LevelMismatch: return "LevelMismatch";
    case Errc::ElectionMismatch: return "ElectionMismatch";
    case Errc::ChildLinkBroken: return "ChildLinkBroken";
    case Errc::AnchorMismatch: return "AnchorMismatch";
    case Errc::UnknownVoter: return "UnknownVoter";
    case Errc::WrongPassword: return "WrongPassword";
    case Errc::WrongStation: return "WrongStation";
    case Errc::AlreadyVoted: return "AlreadyVoted";
    case Errc::VoteInProgress: return "VoteInProgress";
    case Errc::TokenAlreadyConsumed: return "TokenAlreadyConsumed";
    case Errc::TokenExpired: return "TokenExpired";
    case Errc::UnknownBallotBox: return "UnknownBallotBox";
    case Errc::UnknownCandidate: return "UnknownCandidate";
    case Errc::InvalidCandidate: return "InvalidCandidate";
    case Errc::VotingPaused: return "VotingPaused";
    case Errc::CenterDown: return "CenterDown";
    case Errc::StaleAck: return "StaleAck";
    case Errc::RoundAlreadyOpen: return "RoundAlreadyOpen";
    case Errc::NotProposer: return "NotProposer";
    case Errc::RetryCapExceeded: return "RetryCapExceeded";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::InvalidChain: return "InvalidChain";
    case Errc::ParseError: return "ParseError";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace hbvote
