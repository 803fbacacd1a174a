// Entry point of the `syncrec` command line, kept out of main() for tests.
#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace syncrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// `args` excludes the program name. Returns the process exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Set by SIGINT/SIGTERM; long-running subcommands poll it.
std::atomic<bool>& stop_flag();
void install_signal_handlers();

/// Renders `inspect` output for a recording file.
std::string inspect_report(const std::string& path);

} // namespace syncrec::cli
