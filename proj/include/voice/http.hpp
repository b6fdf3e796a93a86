#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "voice/cancel.hpp"
#include "voice/url.hpp"

namespace voice {

struct HttpStreamRequest {
  Url url;
  std::string path;
  std::string body;
  std::string content_type = "application/json";
  std::vector<std::pair<std::string, std::string>> headers;
  int connect_timeout_ms = 5000;
  int read_timeout_ms = 60000;
};

struct HttpStreamResult {
  int status = 0;               // 0 when no response line arrived
  std::string error_body;       // body of a non-200 response
  std::string transport_error;  // empty on a clean transfer
  bool cancelled = false;
  double first_byte_ms = -1.0;  // arrival of the first 200 body byte
};

// POST with a streamed response body. Body bytes of a 200 response are handed
// to on_bytes as they arrive; returning false aborts the transfer. Cancelling
// the token shuts the socket down.
HttpStreamResult http_post_stream(const HttpStreamRequest& req, const CancelToken* cancel,
                                  const std::function<bool(std::string_view)>& on_bytes);

}  // namespace voice
