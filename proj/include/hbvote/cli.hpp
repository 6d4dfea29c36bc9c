#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace hbvote::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitIncidents = 4;

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> faults;
  std::optional<std::filesystem::path> out;
  bool override_scale = false;
};

/// Default run directory: $HBVOTE_OUT_DIR (or ./hbvote-runs) / <election>-seed<seed>.
std::filesystem::path default_run_dir(const std::string& election_id, std::uint64_t seed);

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_tally(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);
/// `target` is a run directory or a single chain file; a chain file needs a
/// config (default: the config.txt of the run directory holding it).
int cmd_audit(const std::filesystem::path& target, const std::optional<std::filesystem::path>& config,
              const std::optional<std::filesystem::path>& findings_file, std::ostream& out, std::ostream& err);
int cmd_tamper(const std::filesystem::path& run_dir, std::size_t mutations, std::uint64_t seed, std::ostream& out,
               std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int main(int argc, char** argv);

}  // namespace hbvote::cli
