#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "sherlock/checkpoint.hpp"

namespace sherlock {

inline constexpr std::size_t kDefaultMaxBodyBytes = 1 << 20;

struct ServiceOptions {
  std::size_t max_body_bytes = kDefaultMaxBodyBytes;
  std::string allowed_origin = "*";
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling for the scan API, independent of any transport.
/// The loaded model is shared read-only, so calls are thread-safe.
class ScanService {
 public:
  ScanService(std::shared_ptr<const SavedModel> model, ServiceOptions options = {});

  /// POST /scan with `{"code": "..."}`.
  HttpReply scan(std::string_view body) const;
  /// GET /health.
  HttpReply health() const;

  const ServiceOptions& options() const { return options_; }

 private:
  std::shared_ptr<const SavedModel> model_;
  ServiceOptions options_;
};

/// ScanService over HTTP/1.1 (cpp-httplib), with CORS headers for the UI.
class ScanServer {
 public:
  explicit ScanServer(std::shared_ptr<const ScanService> service);
  ~ScanServer();
  ScanServer(const ScanServer&) = delete;
  ScanServer& operator=(const ScanServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sherlock
