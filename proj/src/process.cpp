// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace tracescale {
namespace {

class ProcessGate {
 public:
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < capacity_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    cv_.notify_one();
  }
  void set_capacity(std::size_t n) {
    {
      std::lock_guard lock(mu_);
      capacity_ = n == 0 ? 1 : n;
    }
    cv_.notify_all();
  }
  std::size_t capacity() {
    std::lock_guard lock(mu_);
    return capacity_;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t active_ = 0;
  std::size_t capacity_ = std::max<std::size_t>(1, std::thread::hardware_concurrency());
};

ProcessGate& gate() {
  static ProcessGate g;
  return g;
}

struct GateSlot {
  GateSlot() { gate().acquire(); }
  ~GateSlot() { gate().release(); }
  GateSlot(const GateSlot&) = delete;
  GateSlot& operator=(const GateSlot&) = delete;
};

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_.data(), O_CLOEXEC) != 0) {
      throw std::runtime_error(std::string("pipe2 failed: ") + std::strerror(errno));
    }
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;

  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  void close_read() { close_fd(fds_[0]); }
  void close_write() { close_fd(fds_[1]); }

 private:
  static void close_fd(int& fd) {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }
  std::array<int, 2> fds_{-1, -1};
};

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

[[noreturn]] void child_exec(const char* path, char* const* argv, char* const* envp,
                             int in_fd, int out_fd, int err_fd, int chan_fd,
                             const ProcessLimits& limits) {
  ::setpgid(0, 0);
  // Targets 0..3 may collide with the source descriptors; move sources high first.
  int moved[4] = {::fcntl(in_fd, F_DUPFD, 10), ::fcntl(out_fd, F_DUPFD, 10),
                  ::fcntl(err_fd, F_DUPFD, 10), ::fcntl(chan_fd, F_DUPFD, 10)};
  for (int target = 0; target < 4; ++target) {
    if (moved[target] < 0 || ::dup2(moved[target], target) < 0) ::_exit(126);
  }
  for (int fd : moved) ::close(fd);

  rlimit mem{limits.memory_bytes, limits.memory_bytes};
  ::setrlimit(RLIMIT_AS, &mem);
  const auto cpu = static_cast<rlim_t>(std::ceil(limits.wall_seconds)) + 1;
  rlimit cpu_lim{cpu, cpu + 1};
  ::setrlimit(RLIMIT_CPU, &cpu_lim);
  rlimit core{0, 0};
  ::setrlimit(RLIMIT_CORE, &core);
  rlimit fsize{std::size_t{64} << 20, std::size_t{64} << 20};
  ::setrlimit(RLIMIT_FSIZE, &fsize);

  ::execve(path, argv, envp);
  ::_exit(127);
}

}  // namespace

void set_max_concurrent_processes(std::size_t n) { gate().set_capacity(n); }
std::size_t max_concurrent_processes() { return gate().capacity(); }

std::string find_executable(std::string_view name) {
  if (name.find('/') != std::string_view::npos) {
    return ::access(std::string(name).c_str(), X_OK) == 0 ? std::string(name) : std::string();
  }
  const char* path = std::getenv("PATH");
  std::string_view dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
  while (!dirs.empty()) {
    auto colon = dirs.find(':');
    std::string dir(dirs.substr(0, colon));
    dirs = colon == std::string_view::npos ? std::string_view{} : dirs.substr(colon + 1);
    if (dir.empty()) dir = ".";
    std::string candidate = dir + "/" + std::string(name);
    struct stat st {};
    if (::stat(candidate.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
        ::access(candidate.c_str(), X_OK) == 0) {
      return candidate;
    }
  }
  return {};
}

ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::vector<std::string>& env,
                          std::string_view stdin_data,
                          const ProcessLimits& limits) {
  if (argv.empty()) throw std::invalid_argument("run_process: empty argv");
  const std::string path = find_executable(argv.front());
  if (path.empty()) throw std::runtime_error("executable not found: " + argv.front());

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<char*> cenv;
  for (const auto& e : env) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);

  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });

  GateSlot slot;
  Pipe in, out, err, chan;
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    child_exec(path.c_str(), cargv.data(), cenv.data(), in.read_end(), out.write_end(),
               err.write_end(), chan.write_end(), limits);
  }
  ::setpgid(pid, pid);
  in.close_read();
  out.close_write();
  err.close_write();
  chan.close_write();
  set_nonblocking(in.write_end());
  set_nonblocking(out.read_end());
  set_nonblocking(err.read_end());
  set_nonblocking(chan.read_end());

  ProcessResult result;
  std::string* sinks[3] = {&result.stdout_text, &result.stderr_text, &result.channel_text};
  const int readers[3] = {out.read_end(), err.read_end(), chan.read_end()};
  bool open[3] = {true, true, true};
  std::size_t written = 0;
  bool stdin_open = true;
  if (stdin_data.empty()) {
    in.close_write();
    stdin_open = false;
  }

  const auto deadline =
      start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(limits.wall_seconds));
  std::array<char, 65536> buf{};
  while (open[0] || open[1] || open[2]) {
    std::vector<pollfd> fds;
    std::vector<int> which;
    for (int i = 0; i < 3; ++i) {
      if (open[i]) {
        fds.push_back({readers[i], POLLIN, 0});
        which.push_back(i);
      }
    }
    if (stdin_open) {
      fds.push_back({in.write_end(), POLLOUT, 0});
      which.push_back(3);
    }
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.killed_on_deadline = true;
      ::kill(-pid, SIGKILL);
      break;
    }
    const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(wait_ms, 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      ::kill(-pid, SIGKILL);
      break;
    }
    for (std::size_t k = 0; k < fds.size(); ++k) {
      if (fds[k].revents == 0) continue;
      const int i = which[k];
      if (i == 3) {
        const ssize_t n = ::write(in.write_end(), stdin_data.data() + written, stdin_data.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) written = stdin_data.size();
        if (written >= stdin_data.size() || (fds[k].revents & (POLLERR | POLLHUP))) {
          in.close_write();
          stdin_open = false;
        }
        continue;
      }
      const ssize_t n = ::read(readers[i], buf.data(), buf.size());
      if (n > 0) {
        auto& sink = *sinks[i];
        const std::size_t room = limits.max_capture_bytes > sink.size() ? limits.max_capture_bytes - sink.size() : 0;
        sink.append(buf.data(), std::min<std::size_t>(room, static_cast<std::size_t>(n)));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        open[i] = false;
      }
    }
  }
  if (stdin_open) in.close_write();

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  // Reap any grandchildren left in the group.
  ::kill(-pid, SIGKILL);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) result.term_signal = WTERMSIG(status);
  return result;
}

}  // namespace tracescale
