// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tracescale {

/// Resource limits applied to a child process with setrlimit plus a
/// wall-clock deadline enforced by the parent.
struct ProcessLimits {
  double wall_seconds = 10.0;
  std::size_t memory_bytes = std::size_t{512} << 20;
  std::size_t max_capture_bytes = std::size_t{4} << 20;
};

struct ProcessResult {
  int exit_code = -1;
  int term_signal = 0;
  bool killed_on_deadline = false;
  std::string stdout_text;
  std::string stderr_text;
  std::string channel_text;  // contents written to fd 3
  double wall_seconds = 0.0;
};

/// Runs argv[0] (resolved through PATH) in its own process group with
/// `stdin_data` on stdin. The child sees an extra pipe on fd 3.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::vector<std::string>& env,
                          std::string_view stdin_data,
                          const ProcessLimits& limits);

/// Caps the number of children alive at once across all threads.
void set_max_concurrent_processes(std::size_t n);
std::size_t max_concurrent_processes();

/// Absolute path of an executable found on PATH, or empty.
std::string find_executable(std::string_view name);

}  // namespace tracescale
