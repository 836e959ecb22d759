// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "seqtag/errors.hpp"
#include "seqtag/model.hpp"

namespace seqtag {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Bad command-line usage; reported with exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Settings for a training run: model hyperparameters plus paths and the
/// split seed.
struct RunConfig {
  ModelConfig model;
  std::string corpus;      // empty when unset
  std::string output_dir;  // empty when unset
  std::uint64_t split_seed = 13;
  std::size_t min_count = 1;

  bool operator==(const RunConfig&) const = default;
};

/// Parses "key = value" lines over `base`. '#' starts a comment. Throws
/// ConfigError naming any unknown key or bad value, ParseError for a line
/// without '='.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});

/// Every key with its resolved value, in parse_run_config's syntax.
std::string render_run_config(const RunConfig& config);

/// Entry point of the `seqtag` tool. argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace seqtag
