#include "voice/url.hpp"

#include <cstdlib>
#include <regex>

#include "voice/error.hpp"

namespace voice {

namespace {

uint16_t default_port(const std::string& scheme) {
  if (scheme == "https" || scheme == "wss") return 443;
  return 80;
}

uint16_t to_port(const std::string& text) {
  const int port = std::stoi(text);
  if (port < 0 || port > 65535) throw Error(Errc::invalid_argument, "port out of range: " + text);
  return static_cast<uint16_t>(port);
}

}  // namespace

std::string Url::origin() const {
  return scheme + "://" + host + ":" + std::to_string(port);
}

std::string Url::path_prefix() const {
  std::string path = target.substr(0, target.find('?'));
  while (!path.empty() && path.back() == '/') path.pop_back();
  return path;
}

Url parse_url(const std::string& text) {
  static const std::regex re(R"(^(https?|wss?)://([^/:?#]+)(?::(\d+))?([/?][^#]*)?$)",
                             std::regex::icase);
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw Error(Errc::invalid_argument, "bad URL: " + text);
  Url url;
  url.scheme = m[1].str();
  for (auto& c : url.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  url.host = m[2].str();
  url.port = m[3].matched ? to_port(m[3].str()) : default_port(url.scheme);
  url.target = m[4].matched ? m[4].str() : "/";
  if (url.target.front() == '?') url.target.insert(0, "/");
  return url;
}

std::pair<std::string, uint16_t> parse_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw Error(Errc::invalid_argument, "expected host:port, got '" + text + "'");
  }
  return {text.substr(0, colon), to_port(text.substr(colon + 1))};
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace voice
