#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "voice/pipeline.hpp"

namespace voice {

namespace net {
class HttpWsServer;
}

struct GatewayConfig {
  PipelineConfig pipeline;
  std::string host = "0.0.0.0";
  uint16_t port = 8080;
  std::filesystem::path static_dir;  // empty: no static files
  int io_threads = 2;
  int health_timeout_ms = 500;

  // BIND_ADDR ("host:port") plus the client modules' variables.
  static GatewayConfig from_env();
};

// Client audio frames are 20 ms of 16 kHz int16 mono.
inline constexpr std::size_t kClientFrameBytes = 640;

// WebSocket front door: /ws for the audio + control protocol, /healthz, and
// static files at /. Each connection owns its own pipeline session, VAD,
// STT stream and hospital store.
class GatewayServer {
 public:
  struct Stats {
    std::size_t sessions_opened = 0;
    std::size_t sessions_closed = 0;
    std::size_t dropped_frames = 0;
    std::size_t turns_started = 0;
  };

  explicit GatewayServer(GatewayConfig config);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  // Binds and serves; returns the bound port. Throws connect-error.
  uint16_t start();
  // Closes every session and waits for their teardown.
  void stop();

  uint16_t port() const { return port_; }
  std::string ws_url() const;
  Stats stats() const;
  std::size_t active_sessions() const;
  // {"status": "ok" | "degraded", "sessions": n, "dependencies": {...}}
  nlohmann::json health() const;

  class Session;

 private:
  void session_finished(std::uint64_t id);

  GatewayConfig config_;
  std::unique_ptr<net::HttpWsServer> server_;
  uint16_t port_ = 0;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::size_t teardown_threads_ = 0;
  Stats stats_;
  std::atomic<bool> stopped_{false};
};

}  // namespace voice
