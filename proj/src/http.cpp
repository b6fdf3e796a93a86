#include "voice/http.hpp"

#include <httplib.h>

#include "voice/clock.hpp"
#include "voice/error.hpp"

namespace voice {

HttpStreamResult http_post_stream(const HttpStreamRequest& req, const CancelToken* cancel,
                                  const std::function<bool(std::string_view)>& on_bytes) {
  HttpStreamResult result;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (req.url.scheme == "https") {
    result.transport_error = "https is not available in this build";
    return result;
  }
#endif
  httplib::Client client(req.url.origin());
  client.set_connection_timeout(std::chrono::milliseconds(req.connect_timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(req.read_timeout_ms));
  client.set_tcp_nodelay(true);
  client.set_keep_alive(false);

  httplib::Request hreq;
  hreq.method = "POST";
  hreq.path = req.path;
  for (const auto& [k, v] : req.headers) hreq.headers.emplace(k, v);
  hreq.headers.emplace("Content-Type", req.content_type);
  hreq.body = req.body;
  hreq.response_handler = [&](const httplib::Response& res) {
    result.status = res.status;
    return true;
  };
  hreq.content_receiver = [&](const char* data, size_t n, uint64_t, uint64_t) {
    if (result.status != 200) {
      result.error_body.append(data, n);
      return true;
    }
    if (result.first_byte_ms < 0) result.first_byte_ms = now_ms();
    return on_bytes(std::string_view(data, n));
  };

  if (cancel && cancel->cancelled()) {
    result.cancelled = true;
    return result;
  }
  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  {
    CancelScope scope(cancel, [&client] { client.stop(); });
    client.send(hreq, res, err);
  }
  if (cancel && cancel->cancelled()) result.cancelled = true;
  if (err != httplib::Error::Success && err != httplib::Error::Canceled) {
    result.transport_error = httplib::to_string(err);
  }
  if (result.status == 0 && res.status > 0 && err == httplib::Error::Success) result.status = res.status;
  return result;
}

}  // namespace voice
