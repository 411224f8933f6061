#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eppo {

/// Bidirectional line-oriented byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Writes `line` plus a trailing newline.
  virtual void send_line(std::string_view line) = 0;
  /// Next line without its newline; nullopt once the deadline passes.
  /// Throws ChannelClosed at end of stream.
  virtual std::optional<std::string> receive_line(std::chrono::steady_clock::time_point deadline) = 0;
};

class ChannelClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owns a pair of POSIX file descriptors (may be the same socket).
class FdLineChannel : public LineChannel {
 public:
  FdLineChannel(int read_fd, int write_fd);
  ~FdLineChannel() override;
  FdLineChannel(const FdLineChannel&) = delete;
  FdLineChannel& operator=(const FdLineChannel&) = delete;

  void send_line(std::string_view line) override;
  std::optional<std::string> receive_line(std::chrono::steady_clock::time_point deadline) override;

 protected:
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

/// Child process speaking the protocol on its stdin/stdout.
class SubprocessChannel final : public FdLineChannel {
 public:
  SubprocessChannel(int read_fd, int write_fd, int pid);
  ~SubprocessChannel() override;

 private:
  int pid_;
};

std::unique_ptr<LineChannel> spawn_subprocess(const std::vector<std::string>& argv);
std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port);

}  // namespace eppo
