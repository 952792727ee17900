#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace gmmn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalAbort = 3 };

/// Flat key=value configuration. Values are kept as text so that an echoed
/// config replays exactly.
using Config = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment.
Config parse_config_text(const std::string& text);

/// Runs one command. args excludes the program name, e.g.
/// {"train-gmmn", "--steps", "0", "--out-dir", "runs/a"}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace gmmn::cli
