#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace voice {

struct SentenceBufferConfig {
  std::size_t min_sentence_chars = 10;
  std::set<std::string> abbreviations = {"Dr.", "Mr.", "Mrs.", "Ms.", "PM.", "AM.", "St.",
                                         "Jr.", "Sr.", "Prof.", "e.g.", "i.e.", "vs."};
  std::string terminators = ".!?";

  // Throws invalid-argument when min_sentence_chars is zero or an
  // abbreviation does not end with a terminator.
  void validate() const;
};

struct SentenceChunk {
  std::string text;
  double emitted_at_ms = 0.0;
  bool is_flush = false;
};

// Turns a token stream into TTS-sized sentences.
//
// A boundary is a terminator followed by an observed whitespace character,
// unless the whitespace-delimited word ending at the terminator ends with a
// configured abbreviation, or the terminator is a '.' between two digits.
// Candidates whose text (ignoring leading whitespace) is shorter than
// min_sentence_chars are held and merged with what follows. Emitted text is
// the exact input character sequence, whitespace included, so concatenating
// every chunk reproduces the stream.
class SentenceBuffer {
 public:
  explicit SentenceBuffer(SentenceBufferConfig config = {});

  std::vector<SentenceChunk> push(std::string_view token);
  std::optional<SentenceChunk> flush();

  const std::string& pending() const { return pending_; }
  const SentenceBufferConfig& config() const { return config_; }

 private:
  bool is_terminator(char c) const;
  bool ends_with_abbreviation(std::size_t terminator_at) const;
  std::size_t content_length(std::size_t end) const;

  SentenceBufferConfig config_;
  std::string pending_;
  // Positions below scan_ have been classified as non-boundaries.
  std::size_t scan_ = 0;
};

}  // namespace voice
