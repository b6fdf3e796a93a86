#include <algorithm>
#include <condition_variable>

#include "voice/clock.hpp"
#include "voice/error.hpp"
#include "voice/mock.hpp"
#include "voice/net/ws.hpp"

namespace voice {

using nlohmann::json;

struct MockStt::Conn {
  std::weak_ptr<net::WsConnection> ws;
  std::thread worker;
  std::mutex mutex;
  std::condition_variable cv;
  bool closed = false;
  bool done = false;  // worker exited

  std::size_t index = 0;     // slot in audio_by_connection
  std::size_t utterance = 0;
  bool pending = false;      // audio received since the last final
  bool explicit_mode = false;
  double last_audio_ms = 0.0;
  double finalize_ms = -1.0;
  std::size_t stream_bytes = 0;
  std::size_t utterance_start_bytes = 0;
  std::size_t frames_in_utterance = 0;
  std::size_t partials_sent = 0;
};

namespace {

std::string result_message(const std::string& text, bool is_final, double audio_start_ms, bool omit_is_final) {
  json j{{"type", "Results"}, {"text", text}, {"speech_final", is_final}, {"audio_start_ms", audio_start_ms}};
  if (!omit_is_final) j["is_final"] = is_final;
  return j.dump();
}

bool all_zero(const std::string& bytes) {
  return std::all_of(bytes.begin(), bytes.end(), [](char c) { return c == 0; });
}

bool token_ok(const net::HttpRequest& req, const std::string& token) {
  auto auth = req.find(net::http::field::authorization);
  if (auth != req.end() && std::string(auth->value()) == "Token " + token) return true;
  const std::string target(req.target());
  return target.find("token=" + token) != std::string::npos;
}

}  // namespace

MockStt::MockStt(Scenario scenario, const std::string& host, uint16_t port)
    : scenario_(std::move(scenario)), host_(host) {
  net::HttpWsServer::Handlers handlers;
  handlers.on_http = [](const net::HttpRequest& req) {
    return net::make_response(req, net::http::status::ok, "ok");
  };
  handlers.check_upgrade = [this](const net::HttpRequest& req) -> std::optional<net::HttpResponse> {
    if (scenario_.stt.required_token && !token_ok(req, *scenario_.stt.required_token)) {
      std::lock_guard lock(mutex_);
      ++stats_.rejected;
      return net::make_response(req, net::http::status::unauthorized, "invalid credentials");
    }
    return std::nullopt;
  };
  handlers.on_ws = [this](std::shared_ptr<net::WsConnection> ws, const net::HttpRequest&) {
    reap();
    auto conn = std::make_shared<Conn>();
    conn->ws = ws;
    {
      std::lock_guard lock(mutex_);
      ++stats_.connections;
      ++stats_.open_connections;
      conn->index = stats_.audio_by_connection.size();
      stats_.audio_by_connection.emplace_back();
      conns_.push_back(conn);
    }

    auto send_final = [this, conn](std::unique_lock<std::mutex>& lock) {
      const auto& turn = scenario_.turn(conn->utterance);
      const double start_ms = static_cast<double>(conn->utterance_start_bytes) / 32.0;
      conn->pending = false;
      conn->finalize_ms = -1.0;
      conn->frames_in_utterance = 0;
      conn->partials_sent = 0;
      ++conn->utterance;
      lock.unlock();
      if (auto ws = conn->ws.lock()) {
        ws->send_text(result_message(turn.user_transcript, true, start_ms, scenario_.stt.omit_is_final));
      }
      {
        std::lock_guard g(mutex_);
        ++stats_.finals_sent;
        stats_.final_sent_ms.push_back(now_ms());
      }
      lock.lock();
    };

    conn->worker = std::thread([this, conn, send_final] {
      std::unique_lock lock(conn->mutex);
      while (!conn->closed) {
        if (!conn->pending || (conn->explicit_mode && conn->finalize_ms < 0)) {
          conn->cv.wait(lock);
          continue;
        }
        const auto& turn = scenario_.turn(conn->utterance);
        double base = conn->explicit_mode ? conn->finalize_ms : conn->last_audio_ms;
        double deadline = base + turn.stt_final_delay_ms;
        if (cold_pending_.load()) deadline += scenario_.stt.cold_start_ms;
        if (now_ms() < deadline) {
          conn->cv.wait_until(lock, to_time_point(deadline));
          continue;
        }
        cold_pending_ = false;
        send_final(lock);
      }
      conn->done = true;
    });

    net::WsConnection::Handlers h;
    h.on_message = [this, conn](net::WsMessage&& msg) {
      if (msg.binary) {
        bool zero = all_zero(msg.data);
        std::optional<std::string> partial;
        double start_ms = 0.0;
        {
          std::lock_guard lock(conn->mutex);
          if (!conn->pending) {
            conn->pending = true;
            conn->utterance_start_bytes = conn->stream_bytes;
          }
          conn->stream_bytes += msg.data.size();
          conn->last_audio_ms = now_ms();
          ++conn->frames_in_utterance;
          const auto& turn = scenario_.turn(conn->utterance);
          const auto every = static_cast<std::size_t>(scenario_.stt.partial_every_frames);
          if (conn->frames_in_utterance % every == 0 && conn->partials_sent < turn.stt_partials.size()) {
            partial = turn.stt_partials[conn->partials_sent++];
            start_ms = static_cast<double>(conn->utterance_start_bytes) / 32.0;
          }
          conn->cv.notify_all();
        }
        {
          std::lock_guard lock(mutex_);
          ++stats_.frames_received;
          stats_.bytes_received += msg.data.size();
          if (zero) ++stats_.zero_frames;
          stats_.audio_by_connection[conn->index] += msg.data;
          if (partial) ++stats_.partials_sent;
        }
        if (partial) {
          if (auto ws = conn->ws.lock()) {
            ws->send_text(result_message(*partial, false, start_ms, scenario_.stt.omit_is_final));
          }
        }
        return;
      }
      json j = json::parse(msg.data, nullptr, false);
      const std::string type = j.is_object() ? j.value("type", "") : "";
      if (type == "KeepAlive") {
        std::lock_guard lock(mutex_);
        ++stats_.keepalives;
      } else if (type == "Finalize") {
        {
          std::lock_guard lock(mutex_);
          ++stats_.finalizes;
        }
        std::lock_guard lock(conn->mutex);
        conn->explicit_mode = true;
        if (conn->pending && conn->finalize_ms < 0) conn->finalize_ms = now_ms();
        conn->cv.notify_all();
      } else if (type == "CloseStream") {
        {
          std::lock_guard lock(mutex_);
          ++stats_.closed_streams;
        }
        if (auto ws = conn->ws.lock()) ws->close();
      }
    };
    h.on_close = [this, conn](const net::beast::error_code&) {
      {
        std::lock_guard lock(conn->mutex);
        conn->closed = true;
        conn->cv.notify_all();
      }
      std::lock_guard lock(mutex_);
      ++stats_.disconnects;
      if (stats_.open_connections > 0) --stats_.open_connections;
    };
    ws->start(std::move(h));
  };

  server_ = std::make_unique<net::HttpWsServer>(std::move(handlers), 2);
  port_ = server_->listen(host, port);
}

MockStt::~MockStt() { stop(); }

std::string MockStt::url() const { return "ws://" + host_ + ":" + std::to_string(port_) + "/v1/listen"; }

MockStt::Stats MockStt::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

void MockStt::reap() {
  std::vector<std::shared_ptr<Conn>> finished;
  {
    std::lock_guard lock(mutex_);
    auto it = std::stable_partition(conns_.begin(), conns_.end(), [](const auto& c) {
      std::lock_guard g(c->mutex);
      return !c->done;
    });
    finished.assign(it, conns_.end());
    conns_.erase(it, conns_.end());
  }
  for (auto& c : finished) {
    if (c->worker.joinable()) c->worker.join();
  }
}

void MockStt::stop() {
  if (stopped_.exchange(true)) return;
  if (server_) server_->stop();
  std::vector<std::shared_ptr<Conn>> conns;
  {
    std::lock_guard lock(mutex_);
    conns.swap(conns_);
  }
  for (auto& c : conns) {
    {
      std::lock_guard lock(c->mutex);
      c->closed = true;
      c->cv.notify_all();
    }
    if (c->worker.joinable()) c->worker.join();
  }
}

}  // namespace voice
