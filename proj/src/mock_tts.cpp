#include <httplib.h>

#include <cmath>

#include "voice/audio.hpp"
#include "voice/clock.hpp"
#include "voice/error.hpp"
#include "voice/mock.hpp"
#include "voice/tts_client.hpp"

namespace voice {

using nlohmann::json;

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

MockTts::MockTts(Scenario scenario, const std::string& host, uint16_t port)
    : scenario_(std::move(scenario)), server_(std::make_unique<httplib::Server>()), host_(host) {
  server_->set_tcp_nodelay(true);
  server_->set_keep_alive_max_count(1);
  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  server_->Post(R"(/v1/text-to-speech/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
    const double received = now_ms();
    json body = json::parse(req.body, nullptr, false);
    const std::string text = body.is_object() ? body.value("text", "") : "";
    {
      std::lock_guard lock(mutex_);
      ++stats_.requests;
      stats_.texts.push_back(text);
      stats_.request_received_ms.push_back(received);
    }
    if (scenario_.tts.fail_status) {
      res.status = scenario_.tts.fail_status;
      res.set_content(R"({"detail":"scripted failure"})", "application/json");
      return;
    }
    const std::string wanted = trim(text);
    if (wanted.empty()) {
      res.status = 400;
      res.set_content(R"({"detail":"text required"})", "application/json");
      return;
    }
    const ScenarioTurn* turn = &scenario_.turns.front();
    for (const auto& t : scenario_.turns) {
      if (t.script_text().find(wanted) != std::string::npos) {
        turn = &t;
        break;
      }
    }

    const double total_ms = static_cast<double>(count_words(wanted)) * turn->tts_ms_per_word;
    const auto total_samples = static_cast<std::size_t>(std::llround(total_ms * kTtsSampleRate / 1000.0));
    const auto chunk_samples =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scenario_.tts.chunk_ms * kTtsSampleRate / 1000.0)));
    double start = received + turn->tts_ttfb_ms;
    if (cold_pending_.exchange(false)) start += scenario_.tts.cold_start_ms;
    const double step = scenario_.tts.chunk_ms * turn->tts_rtf;
    const double tone = scenario_.tts.tone_hz;
    const int drop_after = scenario_.tts.drop_after_chunks;

    res.set_chunked_content_provider(
        "application/octet-stream",
        [this, total_samples, chunk_samples, start, step, tone, drop_after](std::size_t, httplib::DataSink& sink) {
          std::size_t sent = 0;
          int chunks = 0;
          while (sent < total_samples) {
            sleep_until_ms(start + step * chunks);
            if (drop_after >= 0 && chunks >= drop_after) {
              std::lock_guard lock(mutex_);
              ++stats_.aborted_streams;
              return false;
            }
            const std::size_t n = std::min(chunk_samples, total_samples - sent);
            auto samples = make_tone(n, kTtsSampleRate, tone, 8000, sent);
            const auto bytes = to_le_bytes(samples);
            if (!sink.write(reinterpret_cast<const char*>(bytes.data()), bytes.size())) {
              std::lock_guard lock(mutex_);
              ++stats_.aborted_streams;
              return false;
            }
            {
              std::lock_guard lock(mutex_);
              if (chunks == 0) stats_.first_chunk_ms.push_back(now_ms());
              stats_.bytes_sent += bytes.size();
            }
            sent += n;
            ++chunks;
          }
          sink.done();
          std::lock_guard lock(mutex_);
          ++stats_.completed_streams;
          return true;
        });
  });

  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::connect_error, "mock tts cannot bind " + host + ":" + std::to_string(port));
  port_ = static_cast<uint16_t>(bound);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockTts::~MockTts() { stop(); }

std::string MockTts::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

MockTts::Stats MockTts::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

void MockTts::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace voice
