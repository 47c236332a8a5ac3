// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/executor/sandbox.hpp"

#include "neuroflow/common/io.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace neuroflow::executor {

namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset(int fd = -1) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
  }

 private:
  int fd_ = -1;
};

void make_pipe(Fd& r, Fd& w) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw SpawnError(std::string("pipe: ") + std::strerror(errno));
  r.reset(fds[0]);
  w.reset(fds[1]);
}

/// Keeps only the last `limit` bytes seen.
class Tail {
 public:
  explicit Tail(std::size_t limit) : limit_(limit) {}
  void append(const char* data, std::size_t n) {
    buf_.append(data, n);
    if (buf_.size() > 2 * limit_) buf_.erase(0, buf_.size() - limit_);
  }
  std::string str() const { return buf_.size() > limit_ ? buf_.substr(buf_.size() - limit_) : buf_; }

 private:
  std::size_t limit_;
  std::string buf_;
};

}  // namespace

ExecutionResult sandbox_exec(const SandboxSpec& spec) {
  if (spec.argv.empty()) throw SpawnError("empty argv");
  if (spec.timeout_seconds <= 0) throw SpawnError("timeout must be positive");

  std::string program = spec.argv.front();
  if (program.find('/') == std::string::npos) {
    const auto found = find_executable(program);
    if (found.empty()) throw SpawnError("executable not found on PATH: " + program);
    program = found.string();
  }

  // Everything the child touches is prepared before fork.
  std::vector<std::string> env_strings;
  if (const char* path = std::getenv("PATH")) env_strings.push_back(std::string("PATH=") + path);
  for (const auto& name : spec.env_allowlist) {
    if (name == "PATH") continue;
    if (const char* v = std::getenv(name.c_str())) env_strings.push_back(name + "=" + v);
  }
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> args = spec.argv;
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  const std::string cwd = spec.cwd.string();

  std::ofstream out_log(spec.stdout_log, std::ios::binary | std::ios::trunc);
  std::ofstream err_log(spec.stderr_log, std::ios::binary | std::ios::trunc);
  if (!out_log || !err_log) throw IoError("cannot open step log files in " + spec.stdout_log.parent_path().string());

  Fd out_r, out_w, err_r, err_w, status_r, status_w;
  make_pipe(out_r, out_w);
  make_pipe(err_r, err_w);
  make_pipe(status_r, status_w);

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    int err = 0;
    if (::chdir(cwd.c_str()) != 0 || ::dup2(out_w.get(), STDOUT_FILENO) < 0 || ::dup2(err_w.get(), STDERR_FILENO) < 0) {
      err = errno;
    } else {
      const int devnull = ::open("/dev/null", O_RDONLY);
      if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
      ::execve(program.c_str(), argv.data(), envp.data());
      err = errno;
    }
    // Report the errno through the CLOEXEC pipe; a successful exec closes it silently.
    [[maybe_unused]] auto n = ::write(status_w.get(), &err, sizeof err);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  out_w.reset();
  err_w.reset();
  status_w.reset();

  int child_errno = 0;
  if (::read(status_r.get(), &child_errno, sizeof child_errno) == static_cast<ssize_t>(sizeof child_errno)) {
    int st = 0;
    ::waitpid(pid, &st, 0);
    throw SpawnError("cannot execute " + program + ": " + std::strerror(child_errno));
  }

  ExecutionResult result;
  Tail out_tail(spec.tail_bytes), err_tail(spec.tail_bytes);
  const auto deadline = start + std::chrono::duration<double>(spec.timeout_seconds);
  bool out_open = true, err_open = true, exited = false, killed = false;
  int status = 0;
  char buf[16384];

  auto drain = [&](int fd, bool& open, Tail& tail, std::ofstream& log) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n > 0) {
      tail.append(buf, static_cast<std::size_t>(n));
      log.write(buf, n);
    } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
      open = false;
    }
  };

  while (out_open || err_open || !exited) {
    if (!killed) {
      const bool cancelled = spec.cancel && spec.cancel->load();
      if (cancelled || std::chrono::steady_clock::now() >= deadline) {
        ::kill(-pid, SIGKILL);
        killed = true;
        result.timed_out = !cancelled;
        result.cancelled = cancelled;
      }
    }
    if (out_open || err_open) {
      pollfd fds[2];
      nfds_t n = 0;
      if (out_open) fds[n++] = {out_r.get(), POLLIN, 0};
      if (err_open) fds[n++] = {err_r.get(), POLLIN, 0};
      const int rc = ::poll(fds, n, 50);
      if (rc > 0) {
        for (nfds_t i = 0; i < n; ++i) {
          if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
          if (fds[i].fd == out_r.get())
            drain(out_r.get(), out_open, out_tail, out_log);
          else
            drain(err_r.get(), err_open, err_tail, err_log);
        }
      }
    } else if (!exited) {
      ::usleep(10000);
    }
    if (!exited) {
      const pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) {
        exited = true;
        // Background children that kept the pipes open are not waited for.
        ::kill(-pid, SIGKILL);
      }
    }
  }

  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.stdout_tail = out_tail.str();
  result.stderr_tail = err_tail.str();
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.term_signal = WTERMSIG(status);
    result.exit_code = 128 + result.term_signal;
  }
  return result;
}

}  // namespace neuroflow::executor
