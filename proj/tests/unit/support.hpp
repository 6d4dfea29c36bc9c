#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "hbvote/chain.hpp"
#include "hbvote/config.hpp"

namespace hbvote::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hbvote-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Appends `n` mined votes for `box`, cycling through `candidates`.
inline Chain mined_vote_chain(std::size_t n, std::uint32_t zero_bits = 8, const std::string& box = "box-000",
                              const std::vector<std::string>& candidates = {"A", "B", "C"},
                              const std::string& election = "E1") {
  Chain chain(election, 0);
  const Difficulty difficulty = Difficulty::level0(zero_bits);
  for (std::size_t i = 0; i < n; ++i) {
    VoteBlock v{election, box, candidates[i % candidates.size()], chain.tip_hash(), ""};
    v.nonce = mine(v, difficulty.at(0));
    chain = append(std::move(chain), std::move(v), difficulty);
  }
  return chain;
}

/// Desk-scale election used across the integration-style tests.
inline ElectionConfig small_config(std::uint64_t voters = 600, std::uint32_t clusters = 2,
                                   std::uint32_t centers = 3) {
  ElectionConfig c;
  c.voters = voters;
  c.clusters = clusters;
  c.centers_per_cluster = centers;
  c.levels = 2;
  c.zero_bits = {4};
  c.election_duration_s = 3600;
  c.sync_interval_s = 300;
  c.pause_s = 60;
  return c;
}

}  // namespace hbvote::testing
