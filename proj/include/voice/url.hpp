#pragma once

#include <cstdint>
#include <string>

namespace voice {

struct Url {
  std::string scheme;  // http, https, ws, wss
  std::string host;
  uint16_t port = 0;
  std::string target = "/";  // path plus query

  // scheme://host:port, as accepted by HTTP client constructors.
  std::string origin() const;
  // Target path without a trailing slash, "" for the root.
  std::string path_prefix() const;
};

// Throws invalid-argument on anything that is not scheme://host[:port][/path].
Url parse_url(const std::string& text);

// "host:port" -> (host, port).
std::pair<std::string, uint16_t> parse_host_port(const std::string& text);

std::string env_or(const char* name, const std::string& fallback);

}  // namespace voice
