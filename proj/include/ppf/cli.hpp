#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ppf {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNoDetection = 1;
inline constexpr int kExitInputError = 2;

/// Runs one subcommand (train, detect, eval-vsd, synth, bench,
/// import-sixd). `args`
/// excludes the program name. Records go to `out` as JSON lines, the first
/// being a metadata record with the resolved configuration; the human
/// summary goes to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ppf
