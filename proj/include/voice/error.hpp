#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voice {

enum class Errc {
  invalid_argument,
  format_error,
  unsupported_encoding,
  protocol_error,
  connect_error,
  session_error,
  session_closed,
  timeout,
  request_error,
  truncated_stream,
  malformed_tool_arguments,
  synthesis_error,
  truncated_audio,
  bench_error,
  load_error,
};

std::string_view to_string(Errc code);

// Single exception type for the library. `detail` carries diagnostics such as
// the raw payload of a rejected server message; `status` carries an HTTP
// status where one applies.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string detail = {},
        int status = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)),
        status_(status) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  int status() const noexcept { return status_; }

 private:
  Errc code_;
  std::string detail_;
  int status_;
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::format_error: return "format-error";
    case Errc::unsupported_encoding: return "unsupported-encoding";
    case Errc::protocol_error: return "protocol-error";
    case Errc::connect_error: return "connect-error";
    case Errc::session_error: return "session-error";
    case Errc::session_closed: return "session-closed";
    case Errc::timeout: return "timeout";
    case Errc::request_error: return "request-error";
    case Errc::truncated_stream: return "truncated-stream";
    case Errc::malformed_tool_arguments: return "malformed-tool-arguments";
    case Errc::synthesis_error: return "synthesis-error";
    case Errc::truncated_audio: return "truncated-audio";
    case Errc::bench_error: return "bench-error";
    case Errc::load_error: return "load-error";
  }
  return "unknown";
}

}  // namespace voice
