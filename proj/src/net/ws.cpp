#include "voice/net/ws.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/strand.hpp>

#include "voice/error.hpp"
#include "voice/url.hpp"

namespace voice::net {

namespace {

bool is_benign_close(const beast::error_code& ec) {
  return ec == websocket::error::closed || ec == asio::error::eof ||
         ec == asio::error::operation_aborted || ec == asio::error::connection_reset;
}

// Repeats a declined upgrade over plain HTTP and returns the status.
int declined_status(const tcp::resolver::results_type& results, const Url& url, const Headers& headers,
                    std::chrono::milliseconds timeout) {
  asio::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.expires_after(timeout);
  beast::error_code ec;
  stream.connect(results, ec);
  if (ec) return 0;
  http::request<http::empty_body> req{http::verb::get, url.target, 11};
  req.set(http::field::host, url.host + ":" + std::to_string(url.port));
  req.set(http::field::connection, "Upgrade");
  req.set(http::field::upgrade, "websocket");
  req.set(http::field::sec_websocket_version, "13");
  req.set(http::field::sec_websocket_key, "dGhlIHNhbXBsZSBub25jZQ==");
  for (const auto& [k, v] : headers) req.set(k, v);
  http::write(stream, req, ec);
  if (ec) return 0;
  beast::flat_buffer buf;
  http::response_parser<http::empty_body> parser;
  http::read_header(stream, buf, parser, ec);
  if (ec) return 0;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return static_cast<int>(parser.get().result_int());
}

}  // namespace

// --- WsConnection -----------------------------------------------------------

WsConnection::WsConnection(Stream stream) : ws_(std::move(stream)) {
  ws_.auto_fragment(false);
  ws_.read_message_max(16 * 1024 * 1024);
}

void WsConnection::start(Handlers handlers) {
  handlers_ = std::move(handlers);
  asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_read(); });
}

void WsConnection::do_read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return self->fail(ec);
    WsMessage msg{self->ws_.got_binary(), beast::buffers_to_string(self->buffer_.data())};
    self->buffer_.consume(self->buffer_.size());
    if (self->handlers_.on_message) self->handlers_.on_message(std::move(msg));
    self->do_read();
  });
}

bool WsConnection::send(WsMessage message) {
  std::lock_guard lock(mutex_);
  if (!open_ || closing_) return false;
  queue_.push_back(std::move(message));
  if (!writing_) {
    writing_ = true;
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_write(); });
  }
  return true;
}

void WsConnection::do_write() {
  {
    std::lock_guard lock(mutex_);
    if (queue_.empty() || !open_) {
      writing_ = false;
      if (closing_ && open_ && !close_sent_) {
        close_sent_ = true;
        ws_.async_close(websocket::close_code::normal,
                        [self = shared_from_this()](beast::error_code) {});
      }
      return;
    }
    inflight_ = std::move(queue_.front());
    queue_.pop_front();
  }
  ws_.binary(inflight_.binary);
  ws_.async_write(asio::buffer(inflight_.data),
                  [self = shared_from_this()](beast::error_code ec, std::size_t) {
                    if (ec) {
                      std::lock_guard lock(self->mutex_);
                      self->writing_ = false;
                      self->queue_.clear();
                      return;
                    }
                    self->do_write();
                  });
}

std::size_t WsConnection::drop_pending_binary() {
  std::lock_guard lock(mutex_);
  const auto before = queue_.size();
  std::erase_if(queue_, [](const WsMessage& m) { return m.binary; });
  return before - queue_.size();
}

std::size_t WsConnection::queued() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

void WsConnection::close() {
  std::lock_guard lock(mutex_);
  if (closing_ || !open_) return;
  closing_ = true;
  if (!writing_) {
    writing_ = true;
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_write(); });
  }
}

void WsConnection::post(std::function<void()> fn) {
  asio::post(ws_.get_executor(), std::move(fn));
}

void WsConnection::fail(const beast::error_code& ec) {
  {
    std::lock_guard lock(mutex_);
    open_ = false;
    queue_.clear();
  }
  if (close_notified_) return;
  close_notified_ = true;
  if (handlers_.on_close) handlers_.on_close(ec);
  if (!is_benign_close(ec)) {
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
  }
}

// --- HttpWsServer -----------------------------------------------------------

namespace {

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, const HttpWsServer::Handlers& handlers)
      : stream_(std::move(socket)), handlers_(handlers) {}

  void run() {
    stream_.socket().set_option(tcp::no_delay(true));
    asio::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       self->on_request();
                     });
  }

  void on_request() {
    if (websocket::is_upgrade(req_)) {
      if (handlers_.check_upgrade) {
        if (auto refusal = handlers_.check_upgrade(req_)) {
          return write(std::move(*refusal));
        }
      }
      stream_.expires_never();
      auto ws = std::make_shared<WsConnection::Stream>(std::move(stream_));
      ws->set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      auto req = std::make_shared<HttpRequest>(std::move(req_));
      ws->async_accept(*req, [ws, req, handlers = handlers_](beast::error_code ec) {
        if (ec) return;
        auto conn = std::make_shared<WsConnection>(std::move(*ws));
        if (handlers.on_ws) handlers.on_ws(conn, *req);
      });
      return;
    }
    HttpResponse res = handlers_.on_http ? handlers_.on_http(req_)
                                         : make_response(req_, http::status::not_found, "not found");
    write(std::move(res));
  }

  void write(HttpResponse res) {
    auto sp = std::make_shared<HttpResponse>(std::move(res));
    sp->keep_alive(false);
    sp->prepare_payload();
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  HttpRequest req_;
  HttpWsServer::Handlers handlers_;
};

}  // namespace

HttpResponse make_response(const HttpRequest& req, http::status status, std::string body,
                           std::string content_type) {
  HttpResponse res{status, req.version()};
  res.set(http::field::content_type, content_type);
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

HttpWsServer::HttpWsServer(Handlers handlers, int threads)
    : handlers_(std::move(handlers)), threads_(threads < 1 ? 1 : threads), acceptor_(ioc_) {}

HttpWsServer::~HttpWsServer() { stop(); }

uint16_t HttpWsServer::listen(const std::string& host, uint16_t port) {
  beast::error_code ec;
  const auto address = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
  if (ec) throw Error(Errc::invalid_argument, "bad bind address: " + host);
  tcp::endpoint endpoint{address, port};
  acceptor_.open(endpoint.protocol(), ec);
  if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor_.bind(endpoint, ec);
  if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(Errc::connect_error, "cannot bind " + host + ":" + std::to_string(port) + ": " +
                                         ec.message());
  }
  port_ = acceptor_.local_endpoint().port();
  work_.emplace(ioc_.get_executor());
  do_accept();
  for (int i = 0; i < threads_; ++i) pool_.emplace_back([this] { ioc_.run(); });
  return port_;
}

void HttpWsServer::do_accept() {
  acceptor_.async_accept(asio::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
    if (stopped_) return;
    if (!ec) std::make_shared<HttpSession>(std::move(socket), handlers_)->run();
    do_accept();
  });
}

void HttpWsServer::stop() {
  if (stopped_.exchange(true)) return;
  asio::post(ioc_, [this] {
    beast::error_code ignored;
    acceptor_.close(ignored);
  });
  work_.reset();
  ioc_.stop();
  for (auto& t : pool_) {
    if (t.joinable()) t.join();
  }
}

// --- WsClient ---------------------------------------------------------------

std::unique_ptr<WsClient> WsClient::connect(const std::string& url_text, const Headers& headers,
                                            std::chrono::milliseconds timeout) {
  const Url url = parse_url(url_text);
  if (url.scheme != "ws") {
    // TODO: wss:// needs an ssl_stream variant of WsConnection.
    throw Error(Errc::connect_error, "only ws:// endpoints are supported: " + url_text);
  }
  std::unique_ptr<WsClient> client(new WsClient());
  auto& ioc = client->ioc_;

  beast::error_code ec;
  tcp::resolver resolver(ioc);
  const auto results = resolver.resolve(url.host, std::to_string(url.port), ec);
  if (ec) throw Error(Errc::connect_error, "resolve " + url.host + ": " + ec.message());

  WsConnection::Stream ws(asio::make_strand(ioc));
  auto& lowest = beast::get_lowest_layer(ws);
  lowest.expires_after(timeout);
  lowest.connect(results, ec);
  if (ec) throw Error(Errc::connect_error, "connect " + url.host + ":" + std::to_string(url.port) +
                                               ": " + ec.message());
  lowest.socket().set_option(tcp::no_delay(true));
  ws.set_option(websocket::stream_base::decorator([headers](websocket::request_type& req) {
    for (const auto& [k, v] : headers) req.set(k, v);
  }));
  websocket::response_type res;
  ws.handshake(res, url.host + ":" + std::to_string(url.port), url.target, ec);
  if (ec) {
    const int status = ec == websocket::error::upgrade_declined ? declined_status(results, url, headers, timeout)
                                                                 : 0;
    if (status == 401 || status == 403) {
      throw Error(Errc::connect_error, "auth rejected by " + url_text, res.body(), status);
    }
    throw Error(Errc::connect_error, "handshake with " + url_text + ": " + ec.message(), {}, status);
  }
  lowest.expires_never();
  websocket::stream_base::timeout opts{};
  opts.handshake_timeout = std::chrono::seconds(2);  // also bounds the close handshake
  opts.idle_timeout = websocket::stream_base::none();
  opts.keep_alive_pings = false;
  ws.set_option(opts);

  client->conn_ = std::make_shared<WsConnection>(std::move(ws));
  WsClient* raw = client.get();
  client->conn_->start({
      [raw](WsMessage&& m) {
        std::lock_guard lock(raw->mutex_);
        raw->inbox_.push_back(std::move(m));
        raw->cv_.notify_all();
      },
      [raw](const beast::error_code&) {
        std::lock_guard lock(raw->mutex_);
        raw->closed_ = true;
        raw->cv_.notify_all();
      },
  });
  client->work_.emplace(ioc.get_executor());
  client->io_thread_ = std::thread([raw] { raw->ioc_.run(); });
  return client;
}

WsClient::~WsClient() {
  close();
  {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, std::chrono::milliseconds(500), [&] { return closed_; });
  }
  work_.reset();
  ioc_.stop();
  if (io_thread_.joinable()) io_thread_.join();
}

bool WsClient::send_text(std::string text) { return conn_->send_text(std::move(text)); }
bool WsClient::send_binary(std::string bytes) { return conn_->send_binary(std::move(bytes)); }

std::optional<WsMessage> WsClient::receive(std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock lock(mutex_);
  auto ready = [&] { return !inbox_.empty() || closed_; };
  if (timeout) {
    if (!cv_.wait_for(lock, *timeout, ready)) throw Error(Errc::timeout, "no message within deadline");
  } else {
    cv_.wait(lock, ready);
  }
  if (inbox_.empty()) return std::nullopt;
  WsMessage m = std::move(inbox_.front());
  inbox_.pop_front();
  return m;
}

void WsClient::close() {
  if (conn_) conn_->close();
}

bool WsClient::is_open() const {
  std::lock_guard lock(mutex_);
  return !closed_;
}

}  // namespace voice::net
