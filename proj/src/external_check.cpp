#include "kdpg/external_check.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

extern char** environ;

namespace kdpg {

namespace {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

// Writes all of `text`, tolerating a child that exits without reading.
void write_all(int fd, const std::string& text) {
  std::size_t done = 0;
  while (done < text.size()) {
    ssize_t n = ::write(fd, text.data() + done, text.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      return;  // EPIPE: child closed stdin
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

CompileResult external_check(const std::vector<std::string>& command, const Vocab& vocab,
                             const TokenSeq& seq, std::chrono::milliseconds timeout) {
  if (command.empty()) throw Error("SpawnFailure", "empty command");

  // A child exiting before reading stdin must not kill us.
  static const bool sigpipe_ignored = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  int pipe_fds[2];
  if (::pipe2(pipe_fds, O_CLOEXEC) != 0) throw Error("SpawnFailure", std::strerror(errno));
  Fd read_end(pipe_fds[0]);
  Fd write_end(pipe_fds[1]);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, read_end.get(), STDIN_FILENO);

  std::vector<char*> argv;
  for (const auto& arg : command) argv.push_back(const_cast<char*>(arg.c_str()));
  argv.push_back(nullptr);

  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw Error("SpawnFailure", command.front() + ": " + std::strerror(rc));
  }
  read_end.reset();
  write_all(write_end.get(), detokenize(vocab, seq) + "\n");
  write_end.reset();

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  while (true) {
    pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR) throw Error("SpawnFailure", std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw Error("Timeout", command.front() + " exceeded " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  // posix_spawnp reports exec failure of a missing binary as exit status 127
  // on some libcs instead of a return code.
  if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
    throw Error("SpawnFailure", command.front() + ": command not found");
  }
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return CompileResult::success();
  return CompileResult::failure(ErrorKind::UnexpectedToken, 0);
}

}  // namespace kdpg
