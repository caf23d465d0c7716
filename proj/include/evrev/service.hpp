// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/error.hpp"
#include "evrev/workspace.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evrev {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> ui_dir;
  std::vector<std::filesystem::path> label_files;  // for /api/metrics/iaa
  std::chrono::seconds lease_duration{15 * 60};
};

/// HTTP status for an error code (404, 409, 400, 502, 504, 500).
int http_status(ErrorCode code);

/// HTTP+JSON front end over a Workspace.
///
/// Mutating session routes take a lease for (image_uid, qa_id) keyed by the
/// X-Reviewer-Id header; another reviewer holding an unexpired lease gets 409.
class Server {
 public:
  Server(Workspace& workspace, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket. PortInUse when the port is taken, BadConfig when the
  /// UI directory does not exist. Returns the bound port.
  int bind();

  /// Serves on the calling thread until stop(). Calls bind() first if needed.
  void run();
  /// Serves on a background thread; returns once requests are accepted.
  void start();
  /// Blocks until the background thread from start() exits.
  void wait();
  /// Safe from any thread, and before or after run()/start().
  void stop();

  int port() const;
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evrev
