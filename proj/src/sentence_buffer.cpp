#include "voice/sentence_buffer.hpp"

#include <cctype>

#include "voice/clock.hpp"
#include "voice/error.hpp"

namespace voice {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

void SentenceBufferConfig::validate() const {
  if (min_sentence_chars < 1) throw Error(Errc::invalid_argument, "min_sentence_chars must be >= 1");
  if (terminators.empty()) throw Error(Errc::invalid_argument, "terminators must not be empty");
  for (const auto& abbr : abbreviations) {
    if (abbr.empty() || terminators.find(abbr.back()) == std::string::npos) {
      throw Error(Errc::invalid_argument, "abbreviation '" + abbr + "' must end with a terminator");
    }
  }
}

SentenceBuffer::SentenceBuffer(SentenceBufferConfig config) : config_(std::move(config)) {
  config_.validate();
}

bool SentenceBuffer::is_terminator(char c) const {
  return config_.terminators.find(c) != std::string::npos;
}

bool SentenceBuffer::ends_with_abbreviation(std::size_t terminator_at) const {
  std::size_t word_start = terminator_at;
  while (word_start > 0 && !is_space(pending_[word_start - 1])) --word_start;
  const std::string_view word(pending_.data() + word_start, terminator_at + 1 - word_start);
  for (const auto& abbr : config_.abbreviations) {
    if (word.ends_with(abbr)) return true;
  }
  return false;
}

std::size_t SentenceBuffer::content_length(std::size_t end) const {
  std::size_t begin = 0;
  while (begin < end && is_space(pending_[begin])) ++begin;
  return end - begin;
}

std::vector<SentenceChunk> SentenceBuffer::push(std::string_view token) {
  std::vector<SentenceChunk> out;
  pending_.append(token);
  // A position is decidable once the character after it is known.
  while (scan_ + 1 < pending_.size()) {
    const std::size_t i = scan_;
    const char c = pending_[i];
    const bool boundary =
        is_terminator(c) && is_space(pending_[i + 1]) &&
        !(c == '.' && i > 0 && is_digit(pending_[i - 1]) && is_digit(pending_[i + 1])) &&
        !ends_with_abbreviation(i) && content_length(i + 1) >= config_.min_sentence_chars;
    if (!boundary) {
      ++scan_;
      continue;
    }
    out.push_back({pending_.substr(0, i + 1), now_ms(), false});
    pending_.erase(0, i + 1);
    scan_ = 0;
  }
  return out;
}

std::optional<SentenceChunk> SentenceBuffer::flush() {
  if (pending_.empty()) return std::nullopt;
  SentenceChunk chunk{std::move(pending_), now_ms(), true};
  pending_.clear();
  scan_ = 0;
  return chunk;
}

}  // namespace voice
