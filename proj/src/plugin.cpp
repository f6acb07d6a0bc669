#include <cerrno>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <vector>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "rme/denoise.hpp"
#include "rme/errors.hpp"

extern char** environ;

namespace rme::denoise {

namespace {

constexpr char kRequestMagic[4] = {'D', 'N', 'R', 'Q'};
constexpr char kResponseMagic[4] = {'D', 'N', 'R', 'S'};

}  // namespace

PluginBridge::PluginBridge(const std::string& command) {
  // A dead child must surface as a write error, not kill the host.
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw PluginProtocolError("pipe() failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw PluginProtocolError("pipe() failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
  std::string cmd = command;
  char sh[] = "/bin/sh";
  char flag[] = "-c";
  char* argv[] = {sh, flag, cmd.data(), nullptr};
  const int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    pid_ = -1;
    throw PluginProtocolError("failed to launch plugin: " + std::string(std::strerror(rc)));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

PluginBridge::~PluginBridge() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

void PluginBridge::fail(const std::string& what) {
  std::string detail = what;
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == pid_) {
      pid_ = -1;
      if (WIFEXITED(status)) detail += " (plugin exited with status " + std::to_string(WEXITSTATUS(status)) + ")";
    }
  }
  throw PluginProtocolError(detail);
}

void PluginBridge::write_all(const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (size > 0) {
    const ssize_t n = ::write(to_child_, p, size);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail("plugin write failed");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

void PluginBridge::read_all(void* data, std::size_t size) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (size > 0) {
    const ssize_t n = ::read(from_child_, p, size);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail("plugin short read");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

Field PluginBridge::denoise(const Field& image, double sigma) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (pid_ <= 0) throw PluginProtocolError("plugin process is not running");
  const auto m = static_cast<std::uint32_t>(image.rows());
  const auto n = static_cast<std::uint32_t>(image.cols());
  const std::size_t count = static_cast<std::size_t>(m) * n;

  std::vector<std::uint8_t> frame(4 + 4 + 4 + 8 + count * 8);
  std::memcpy(frame.data(), kRequestMagic, 4);
  std::memcpy(frame.data() + 4, &m, 4);
  std::memcpy(frame.data() + 8, &n, 4);
  std::memcpy(frame.data() + 12, &sigma, 8);
  // Column-major field storage is m fastest, matching the wire order.
  std::memcpy(frame.data() + 20, image.data(), count * 8);
  write_all(frame.data(), frame.size());

  char magic[4];
  read_all(magic, 4);
  if (std::memcmp(magic, kResponseMagic, 4) != 0) fail("plugin response has bad magic");
  Field out(image.rows(), image.cols());
  read_all(out.data(), count * 8);
  if (!out.allFinite()) fail("plugin returned non-finite values");
  ++calls_;
  return out;
}

}  // namespace rme::denoise
