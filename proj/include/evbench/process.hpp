#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evbench {

/// Splits a command line on whitespace; single or double quotes group words.
/// No shell expansion is performed.
std::vector<std::string> split_command(std::string_view line);

/// Replaces every `{in}` / `{out}` occurrence in each argument.
std::vector<std::string> expand_template(const std::vector<std::string>& argv, const std::string& in,
                                         const std::string& out);

/// Resolves argv[0] the way execvp would; nullopt when not found/executable.
std::optional<std::string> find_executable(const std::string& name);

struct CommandResult {
  int exit_code = -1;  // -1 when killed by a signal or timed out
  bool timed_out = false;
};

/// Runs argv to completion with stdin/stdout/stderr detached. Kills the
/// process group on timeout.
CommandResult run_command(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);

/// A child with line-oriented pipes on stdin/stdout.
class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Returns false if the pipe is closed.
  bool write_line(std::string_view line);
  /// nullopt on timeout or EOF; eof() tells them apart.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  bool eof() const { return eof_; }

  void close_stdin();
  /// Waits up to `grace` for a clean exit, then SIGKILLs. Returns exit status.
  int terminate(std::chrono::milliseconds grace);

 private:
  int pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  bool eof_ = false;
  bool reaped_ = false;
  std::string buffer_;
};

}  // namespace evbench
