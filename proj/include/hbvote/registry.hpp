#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hbvote/digest.hpp"

namespace hbvote {

struct Credentials {
  std::string voter_id;
  std::string password;
};

struct Candidate {
  std::string id;
  std::string name;

  bool operator==(const Candidate&) const = default;
};

/// Ballot box -> registered candidates. Every list implicitly ends with BLANK.
class CandidateRegistry {
 public:
  void add_ballot_box(const std::string& ballot_box_id, std::vector<Candidate> candidates);

  bool has_ballot_box(std::string_view ballot_box_id) const;

  /// Registered candidates followed by BLANK. Throws UnknownBallotBox.
  std::vector<Candidate> candidates_for(std::string_view ballot_box_id) const;

  /// True for registered candidates and for BLANK.
  bool allows(std::string_view ballot_box_id, std::string_view candidate_id) const;

  const std::map<std::string, std::vector<Candidate>, std::less<>>& boxes() const { return boxes_; }

  /// One JSON object per line: {"ballot_box_id": ..., "candidates": [{"id": ..., "name": ...}]}.
  static CandidateRegistry from_jsonl(std::string_view text);

 private:
  std::map<std::string, std::vector<Candidate>, std::less<>> boxes_;
};

struct VoterRecord {
  std::string voter_id;
  HashDigest password_digest;
  std::string assigned_ballot_box;
  bool voted = false;
  std::optional<std::string> reassigned_to;

  const std::string& effective_ballot_box() const { return reassigned_to ? *reassigned_to : assigned_ballot_box; }
};

/// Single-use permission to cast one vote at one ballot box.
struct AuthToken {
  std::uint64_t serial = 0;
  std::string voter_id;
  std::string ballot_box_id;
  std::uint64_t issued_round = 0;
};

/// Mock e-government registry: authentication, voted flags, candidate and
/// ballot-box relations. All operations are linearized by one mutex.
class Registry {
 public:
  Registry(std::string salt, CandidateRegistry candidates);

  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  /// Throws ConfigInvalid on a duplicate voter, UnknownBallotBox on an
  /// unregistered box.
  void add_voter(const std::string& voter_id, std::string_view password, const std::string& ballot_box_id);
  void add_station(const std::string& node_id, const std::string& ballot_box_id);

  /// Loads {"voter_id", "password", "ballot_box_id"} lines and returns the
  /// credentials in file order.
  std::vector<Credentials> load_voters_jsonl(std::string_view text);

  AuthToken validate(const Credentials& credentials, std::string_view node_id);
  void mark_voted(const AuthToken& token);
  /// Gives back an unused token, e.g. after the cast was rejected.
  void release(const AuthToken& token);
  /// Expires live tokens issued in rounds before `round` and moves the
  /// issuing round forward.
  void begin_round(std::uint64_t round);

  std::vector<Candidate> candidates_for(std::string_view ballot_box_id) const;
  void reassign(const std::string& voter_id, const std::string& new_ballot_box_id);

  std::optional<VoterRecord> voter(std::string_view voter_id) const;
  std::optional<std::string> station_box(std::string_view node_id) const;
  /// Unvoted voters whose effective ballot box is `ballot_box_id`, in load order.
  std::vector<std::string> unvoted_at(std::string_view ballot_box_id) const;
  std::size_t voter_count() const;
  std::size_t voted_count() const;
  /// Voter ids in load order.
  std::vector<std::string> voter_ids() const;

  const CandidateRegistry& candidate_registry() const { return candidates_; }

 private:
  enum class TokenState { Live, Consumed, Expired };
  struct TokenEntry {
    AuthToken token;
    TokenState state;
  };

  HashDigest digest_password(std::string_view password) const;
  TokenEntry& live_entry(const AuthToken& token);

  std::string salt_;
  CandidateRegistry candidates_;

  mutable std::mutex mu_;
  std::unordered_map<std::string, VoterRecord> voters_;
  std::vector<std::string> load_order_;
  std::unordered_map<std::string, std::string> stations_;
  std::unordered_map<std::uint64_t, TokenEntry> tokens_;
  std::unordered_map<std::string, std::uint64_t> outstanding_;
  std::uint64_t next_serial_ = 1;
  std::uint64_t round_ = 0;
};

}  // namespace hbvote
