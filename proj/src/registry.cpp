#include "hbvote/registry.hpp"

#include "hbvote/chain.hpp"
#include "hbvote/error.hpp"
#include "json.hpp"

namespace hbvote {

using json = nlohmann::json;

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

json parse_object_line(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::exception& e) {
    throw ParseError(line_no, e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
  return j;
}

std::string string_field(const json& j, const char* key, std::size_t line_no) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ParseError(line_no, std::string("missing string '") + key + "'");
  return it->get<std::string>();
}

}  // namespace

void CandidateRegistry::add_ballot_box(const std::string& ballot_box_id, std::vector<Candidate> candidates) {
  for (const auto& c : candidates) {
    if (c.id.empty() || c.id == kBlankCandidate) {
      throw Error(Errc::ConfigInvalid, "candidate id '" + c.id + "' is reserved or empty");
    }
  }
  boxes_[ballot_box_id] = std::move(candidates);
}

bool CandidateRegistry::has_ballot_box(std::string_view ballot_box_id) const {
  return boxes_.find(ballot_box_id) != boxes_.end();
}

std::vector<Candidate> CandidateRegistry::candidates_for(std::string_view ballot_box_id) const {
  auto it = boxes_.find(ballot_box_id);
  if (it == boxes_.end()) throw Error(Errc::UnknownBallotBox, std::string(ballot_box_id));
  auto out = it->second;
  out.push_back(Candidate{std::string(kBlankCandidate), "Blank vote"});
  return out;
}

bool CandidateRegistry::allows(std::string_view ballot_box_id, std::string_view candidate_id) const {
  auto it = boxes_.find(ballot_box_id);
  if (it == boxes_.end()) return false;
  if (candidate_id == kBlankCandidate) return true;
  for (const auto& c : it->second) {
    if (c.id == candidate_id) return true;
  }
  return false;
}

CandidateRegistry CandidateRegistry::from_jsonl(std::string_view text) {
  CandidateRegistry reg;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto j = parse_object_line(lines[i], i + 1);
    auto box = string_field(j, "ballot_box_id", i + 1);
    auto list = j.find("candidates");
    if (list == j.end() || !list->is_array()) throw ParseError(i + 1, "missing 'candidates' array");
    std::vector<Candidate> cands;
    for (const auto& c : *list) {
      if (c.is_string()) {
        cands.push_back(Candidate{c.get<std::string>(), c.get<std::string>()});
      } else if (c.is_object()) {
        auto id = string_field(c, "id", i + 1);
        std::string name = c.contains("name") && c["name"].is_string() ? c["name"].get<std::string>() : id;
        cands.push_back(Candidate{id, name});
      } else {
        throw ParseError(i + 1, "candidate entries must be strings or objects");
      }
    }
    reg.add_ballot_box(box, std::move(cands));
  }
  return reg;
}

// ---------------------------------------------------------------------------

Registry::Registry(std::string salt, CandidateRegistry candidates)
    : salt_(std::move(salt)), candidates_(std::move(candidates)) {}

HashDigest Registry::digest_password(std::string_view password) const {
  std::string buf = salt_;
  buf += password;
  return sha256(buf);
}

void Registry::add_voter(const std::string& voter_id, std::string_view password, const std::string& ballot_box_id) {
  if (voter_id.empty() || password.empty()) throw Error(Errc::ConfigInvalid, "voter id and password must be non-empty");
  if (!candidates_.has_ballot_box(ballot_box_id)) throw Error(Errc::UnknownBallotBox, ballot_box_id);
  std::lock_guard lock(mu_);
  VoterRecord rec{voter_id, digest_password(password), ballot_box_id, false, std::nullopt};
  if (!voters_.emplace(voter_id, std::move(rec)).second) throw Error(Errc::ConfigInvalid, "duplicate voter " + voter_id);
  load_order_.push_back(voter_id);
}

void Registry::add_station(const std::string& node_id, const std::string& ballot_box_id) {
  if (!candidates_.has_ballot_box(ballot_box_id)) throw Error(Errc::UnknownBallotBox, ballot_box_id);
  std::lock_guard lock(mu_);
  stations_[node_id] = ballot_box_id;
}

std::vector<Credentials> Registry::load_voters_jsonl(std::string_view text) {
  std::vector<Credentials> out;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto j = parse_object_line(lines[i], i + 1);
    Credentials c{string_field(j, "voter_id", i + 1), string_field(j, "password", i + 1)};
    add_voter(c.voter_id, c.password, string_field(j, "ballot_box_id", i + 1));
    out.push_back(std::move(c));
  }
  return out;
}

AuthToken Registry::validate(const Credentials& credentials, std::string_view node_id) {
  std::lock_guard lock(mu_);
  auto it = voters_.find(credentials.voter_id);
  if (it == voters_.end()) throw Error(Errc::UnknownVoter, "unknown voter");
  VoterRecord& rec = it->second;
  if (rec.password_digest != digest_password(credentials.password)) throw Error(Errc::WrongPassword, "credentials rejected");
  auto station = stations_.find(std::string(node_id));
  if (station == stations_.end() || station->second != rec.effective_ballot_box()) {
    throw Error(Errc::WrongStation, "station " + std::string(node_id) + " does not serve this voter");
  }
  if (rec.voted) throw Error(Errc::AlreadyVoted, "voter is marked as voted");
  if (outstanding_.count(rec.voter_id) != 0) throw Error(Errc::VoteInProgress, "a cast is already in progress for this voter");

  AuthToken token{next_serial_++, rec.voter_id, rec.effective_ballot_box(), round_};
  tokens_.emplace(token.serial, TokenEntry{token, TokenState::Live});
  outstanding_.emplace(rec.voter_id, token.serial);
  return token;
}

Registry::TokenEntry& Registry::live_entry(const AuthToken& token) {
  auto it = tokens_.find(token.serial);
  if (it == tokens_.end() || it->second.token.voter_id != token.voter_id ||
      it->second.token.ballot_box_id != token.ballot_box_id) {
    throw Error(Errc::TokenExpired, "token was never issued");
  }
  if (it->second.state == TokenState::Consumed) throw Error(Errc::TokenAlreadyConsumed, "token already used");
  if (it->second.state == TokenState::Expired) throw Error(Errc::TokenExpired, "token expired");
  return it->second;
}

void Registry::mark_voted(const AuthToken& token) {
  std::lock_guard lock(mu_);
  TokenEntry& entry = live_entry(token);
  VoterRecord& rec = voters_.at(token.voter_id);
  entry.state = TokenState::Consumed;
  outstanding_.erase(token.voter_id);
  rec.voted = true;
}

void Registry::release(const AuthToken& token) {
  std::lock_guard lock(mu_);
  TokenEntry& entry = live_entry(token);
  entry.state = TokenState::Expired;
  outstanding_.erase(token.voter_id);
}

void Registry::begin_round(std::uint64_t round) {
  std::lock_guard lock(mu_);
  for (auto& [serial, entry] : tokens_) {
    if (entry.state == TokenState::Live && entry.token.issued_round < round) {
      entry.state = TokenState::Expired;
      outstanding_.erase(entry.token.voter_id);
    }
  }
  round_ = round;
}

std::vector<Candidate> Registry::candidates_for(std::string_view ballot_box_id) const {
  return candidates_.candidates_for(ballot_box_id);
}

void Registry::reassign(const std::string& voter_id, const std::string& new_ballot_box_id) {
  std::lock_guard lock(mu_);
  auto it = voters_.find(voter_id);
  if (it == voters_.end()) throw Error(Errc::UnknownVoter, "unknown voter");
  if (it->second.voted) throw Error(Errc::AlreadyVoted, "cannot reassign a voter who has voted");
  if (!candidates_.has_ballot_box(new_ballot_box_id)) throw Error(Errc::UnknownBallotBox, new_ballot_box_id);
  if (outstanding_.count(voter_id) != 0) throw Error(Errc::VoteInProgress, "a cast is in progress for this voter");
  it->second.reassigned_to = new_ballot_box_id;
}

std::optional<VoterRecord> Registry::voter(std::string_view voter_id) const {
  std::lock_guard lock(mu_);
  auto it = voters_.find(std::string(voter_id));
  if (it == voters_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> Registry::station_box(std::string_view node_id) const {
  std::lock_guard lock(mu_);
  auto it = stations_.find(std::string(node_id));
  if (it == stations_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Registry::unvoted_at(std::string_view ballot_box_id) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& id : load_order_) {
    const auto& rec = voters_.at(id);
    if (!rec.voted && rec.effective_ballot_box() == ballot_box_id) out.push_back(id);
  }
  return out;
}

std::size_t Registry::voter_count() const {
  std::lock_guard lock(mu_);
  return voters_.size();
}

std::size_t Registry::voted_count() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [id, rec] : voters_) n += rec.voted ? 1 : 0;
  return n;
}

std::vector<std::string> Registry::voter_ids() const {
  std::lock_guard lock(mu_);
  return load_order_;
}

}  // namespace hbvote
