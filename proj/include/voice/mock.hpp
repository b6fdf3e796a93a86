#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "voice/scenario.hpp"

namespace httplib {
class Server;
}

namespace voice {

namespace net {
class HttpWsServer;
}

// Streaming recognition stand-in speaking the minimal transcript shape.
//
// Each connection walks the scenario's turns in order, one per utterance.
// Partials are sent every partial_every_frames audio frames (each scripted
// partial once). The final (is_final and speech_final) is sent
// stt_final_delay_ms after the last audio frame, or after a {"type":"Finalize"}
// message when the client streams continuously; once a connection has sent
// Finalize only Finalize ends utterances.
class MockStt {
 public:
  struct Stats {
    std::size_t connections = 0;
    std::size_t open_connections = 0;
    std::size_t closed_streams = 0;   // CloseStream messages
    std::size_t disconnects = 0;      // sockets closed, any reason
    std::size_t rejected = 0;         // auth refusals
    std::size_t frames_received = 0;
    std::size_t bytes_received = 0;
    std::size_t zero_frames = 0;      // frames whose samples are all zero
    std::size_t keepalives = 0;
    std::size_t finalizes = 0;
    std::size_t partials_sent = 0;
    std::size_t finals_sent = 0;
    std::vector<std::string> audio_by_connection;
    std::vector<double> final_sent_ms;
  };

  explicit MockStt(Scenario scenario, const std::string& host = "127.0.0.1", uint16_t port = 0);
  ~MockStt();
  MockStt(const MockStt&) = delete;
  MockStt& operator=(const MockStt&) = delete;

  std::string url() const;
  uint16_t port() const { return port_; }
  Stats stats() const;
  void stop();

  struct Conn;

 private:
  void reap();

  Scenario scenario_;
  std::unique_ptr<net::HttpWsServer> server_;
  uint16_t port_ = 0;
  std::string host_;
  mutable std::mutex mutex_;
  Stats stats_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::atomic<bool> cold_pending_{true};
  std::atomic<bool> stopped_{false};
};

// OpenAI-compatible chat-completions SSE stand-in. Stateless: the turn is
// (number of user messages - 1) mod turns and the round is the number of
// assistant messages after the last user message; rounds past the script
// repeat its last round.
class MockLlm {
 public:
  struct Stats {
    std::size_t requests = 0;
    std::size_t completed_streams = 0;
    std::size_t aborted_streams = 0;
    std::vector<nlohmann::json> request_bodies;
    std::vector<double> request_received_ms;
    std::vector<double> first_content_ms;
  };

  explicit MockLlm(Scenario scenario, const std::string& host = "127.0.0.1", uint16_t port = 0);
  ~MockLlm();
  MockLlm(const MockLlm&) = delete;
  MockLlm& operator=(const MockLlm&) = delete;

  std::string base_url() const;
  uint16_t port() const { return port_; }
  Stats stats() const;
  void stop();

 private:
  Scenario scenario_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  uint16_t port_ = 0;
  std::string host_;
  mutable std::mutex mutex_;
  Stats stats_;
  std::atomic<bool> cold_pending_{true};
};

// Raw-PCM streaming TTS stand-in: a 440 Hz tone lasting words x
// tts_ms_per_word, first chunk after tts_ttfb_ms, then one chunk_ms chunk
// every chunk_ms x tts_rtf. Timing parameters come from the first turn whose
// script contains the requested text, else the first turn.
class MockTts {
 public:
  struct Stats {
    std::size_t requests = 0;
    std::size_t completed_streams = 0;
    std::size_t aborted_streams = 0;
    std::size_t bytes_sent = 0;
    std::vector<std::string> texts;
    std::vector<double> request_received_ms;
    std::vector<double> first_chunk_ms;
  };

  explicit MockTts(Scenario scenario, const std::string& host = "127.0.0.1", uint16_t port = 0);
  ~MockTts();
  MockTts(const MockTts&) = delete;
  MockTts& operator=(const MockTts&) = delete;

  std::string base_url() const;
  uint16_t port() const { return port_; }
  Stats stats() const;
  void stop();

 private:
  Scenario scenario_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  uint16_t port_ = 0;
  std::string host_;
  mutable std::mutex mutex_;
  Stats stats_;
  std::atomic<bool> cold_pending_{true};
};

// Whitespace-delimited word count used for mock TTS durations.
std::size_t count_words(std::string_view text);

// All three mocks on ephemeral ports.
struct MockSuite {
  explicit MockSuite(const Scenario& scenario, const std::string& host = "127.0.0.1")
      : stt(scenario, host), llm(scenario, host), tts(scenario, host) {}
  MockStt stt;
  MockLlm llm;
  MockTts tts;
};

}  // namespace voice
