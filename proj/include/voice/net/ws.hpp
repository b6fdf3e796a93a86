#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace voice::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

using HttpRequest = http::request<http::string_body>;
using HttpResponse = http::response<http::string_body>;
using Headers = std::vector<std::pair<std::string, std::string>>;

struct WsMessage {
  bool binary = false;
  std::string data;
};

// Async WebSocket endpoint bound to a strand. send() and close() are
// thread-safe; handlers run on the strand. Writes are queued and issued one at
// a time in submission order.
class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  using Stream = websocket::stream<beast::tcp_stream>;
  struct Handlers {
    std::function<void(WsMessage&&)> on_message;
    std::function<void(const beast::error_code&)> on_close;
  };

  explicit WsConnection(Stream stream);

  void start(Handlers handlers);
  bool send(WsMessage message);
  bool send_text(std::string text) { return send({false, std::move(text)}); }
  bool send_binary(std::string bytes) { return send({true, std::move(bytes)}); }
  // Discards queued binary messages that have not started writing.
  std::size_t drop_pending_binary();
  void close();
  void post(std::function<void()> fn);

  bool is_open() const { return open_.load(); }
  std::size_t queued() const;

 private:
  void do_read();
  void do_write();
  void fail(const beast::error_code& ec);

  Stream ws_;
  beast::flat_buffer buffer_;
  Handlers handlers_;
  mutable std::mutex mutex_;
  std::deque<WsMessage> queue_;
  WsMessage inflight_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_sent_ = false;
  std::atomic<bool> open_{true};
  bool close_notified_ = false;
};

// Plain HTTP plus WebSocket upgrade on one port, served by a small thread pool.
class HttpWsServer {
 public:
  struct Handlers {
    std::function<HttpResponse(const HttpRequest&)> on_http;
    // Return a response to refuse the upgrade (for example 401).
    std::function<std::optional<HttpResponse>(const HttpRequest&)> check_upgrade;
    std::function<void(std::shared_ptr<WsConnection>, const HttpRequest&)> on_ws;
  };

  explicit HttpWsServer(Handlers handlers, int threads = 2);
  ~HttpWsServer();
  HttpWsServer(const HttpWsServer&) = delete;
  HttpWsServer& operator=(const HttpWsServer&) = delete;

  // Binds and starts serving; returns the bound port (useful with port 0).
  uint16_t listen(const std::string& host, uint16_t port);
  void stop();
  uint16_t port() const { return port_; }

 private:
  void do_accept();

  Handlers handlers_;
  int threads_;
  asio::io_context ioc_;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work_;
  tcp::acceptor acceptor_;
  std::vector<std::thread> pool_;
  uint16_t port_ = 0;
  std::atomic<bool> stopped_{false};
};

HttpResponse make_response(const HttpRequest& req, http::status status, std::string body,
                           std::string content_type = "text/plain");

// Blocking client facade over WsConnection with its own I/O thread.
class WsClient {
 public:
  // Throws connect-error; an HTTP 401/403 upgrade refusal is reported with
  // that status and the word "auth" in the message.
  static std::unique_ptr<WsClient> connect(const std::string& url, const Headers& headers = {},
                                           std::chrono::milliseconds timeout =
                                               std::chrono::milliseconds(5000));
  ~WsClient();
  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  bool send_text(std::string text);
  bool send_binary(std::string bytes);
  // Next message, nullopt once the connection has closed and the queue is
  // drained. Throws timeout when the deadline passes first.
  std::optional<WsMessage> receive(std::optional<std::chrono::milliseconds> timeout = {});
  void close();
  bool is_open() const;

 private:
  WsClient() = default;

  asio::io_context ioc_;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work_;
  std::thread io_thread_;
  std::shared_ptr<WsConnection> conn_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<WsMessage> inbox_;
  bool closed_ = false;
};

}  // namespace voice::net
