#include "voice/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "voice/error.hpp"

namespace voice {

namespace {

uint32_t read_u32(std::span<const uint8_t> b, std::size_t at) {
  return static_cast<uint32_t>(b[at]) | static_cast<uint32_t>(b[at + 1]) << 8 |
         static_cast<uint32_t>(b[at + 2]) << 16 | static_cast<uint32_t>(b[at + 3]) << 24;
}

uint16_t read_u16(std::span<const uint8_t> b, std::size_t at) {
  return static_cast<uint16_t>(b[at] | b[at + 1] << 8);
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_tag(std::vector<uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

bool tag_is(std::span<const uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

int16_t round_to_sample(double v) {
  // std::lround rounds half away from zero.
  long r = std::lround(v);
  return static_cast<int16_t>(std::clamp<long>(r, INT16_MIN, INT16_MAX));
}

}  // namespace

std::size_t samples_per_chunk(int sample_rate_hz, int chunk_ms) {
  if (sample_rate_hz <= 0) throw Error(Errc::invalid_argument, "sample rate must be positive");
  if (chunk_ms <= 0) throw Error(Errc::invalid_argument, "chunk_ms must be positive");
  const long long product = static_cast<long long>(sample_rate_hz) * chunk_ms;
  if (product % 1000 != 0) {
    throw Error(Errc::invalid_argument, "chunk_ms does not span a whole number of samples");
  }
  return static_cast<std::size_t>(product / 1000);
}

std::vector<AudioFrame> chunk_stream(std::span<const int16_t> samples, AudioFormat format,
                                     int chunk_ms, double start_ms) {
  const std::size_t per_chunk = samples_per_chunk(format.sample_rate_hz, chunk_ms);
  std::vector<AudioFrame> frames;
  frames.reserve((samples.size() + per_chunk - 1) / per_chunk);
  for (std::size_t at = 0, k = 0; at < samples.size(); at += per_chunk, ++k) {
    const std::size_t n = std::min(per_chunk, samples.size() - at);
    AudioFrame frame;
    frame.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(at),
                         samples.begin() + static_cast<std::ptrdiff_t>(at + n));
    frame.sample_rate_hz = format.sample_rate_hz;
    frame.timestamp_ms = start_ms + static_cast<double>(k) * chunk_ms;
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::size_t resampled_length(std::size_t n, int from_hz, int to_hz) {
  if (from_hz <= 0 || to_hz <= 0) throw Error(Errc::invalid_argument, "rates must be positive");
  // round(n * to / from) with halves rounded up, in exact integer arithmetic.
  const auto num = static_cast<unsigned long long>(n) * static_cast<unsigned long long>(to_hz);
  const auto den = static_cast<unsigned long long>(from_hz);
  return static_cast<std::size_t>((2 * num + den) / (2 * den));
}

std::vector<int16_t> resample_linear(std::span<const int16_t> samples, int from_hz, int to_hz) {
  const std::size_t out_len = resampled_length(samples.size(), from_hz, to_hz);
  if (from_hz == to_hz) return {samples.begin(), samples.end()};
  std::vector<int16_t> out(out_len);
  const std::size_t last = samples.empty() ? 0 : samples.size() - 1;
  for (std::size_t i = 0; i < out_len; ++i) {
    const auto pos_num = static_cast<unsigned long long>(i) * static_cast<unsigned long long>(from_hz);
    const auto j = static_cast<std::size_t>(pos_num / static_cast<unsigned long long>(to_hz));
    if (j >= last) {
      out[i] = samples[last];
      continue;
    }
    const double frac = static_cast<double>(pos_num % static_cast<unsigned long long>(to_hz)) / to_hz;
    const double a = samples[j];
    const double b = samples[j + 1];
    out[i] = round_to_sample(a + frac * (b - a));
  }
  return out;
}

std::vector<uint8_t> to_le_bytes(std::span<const int16_t> samples) {
  std::vector<uint8_t> out;
  out.reserve(samples.size() * 2);
  for (int16_t s : samples) put_u16(out, static_cast<uint16_t>(s));
  return out;
}

std::vector<int16_t> from_le_bytes(std::span<const uint8_t> bytes) {
  if (bytes.size() % 2 != 0) {
    throw Error(Errc::protocol_error, "odd PCM byte count " + std::to_string(bytes.size()));
  }
  std::vector<int16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<int16_t>(read_u16(bytes, 2 * i));
  }
  return out;
}

WavData read_wav(std::span<const uint8_t> bytes) {
  if (bytes.size() < 44) {
    throw Error(Errc::format_error, "header: truncated (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (!tag_is(bytes, 0, "RIFF")) throw Error(Errc::format_error, "riff_id: expected 'RIFF'");
  if (!tag_is(bytes, 8, "WAVE")) throw Error(Errc::format_error, "wave_id: expected 'WAVE'");

  bool have_fmt = false;
  WavData wav;
  std::size_t at = 12;
  while (at + 8 <= bytes.size()) {
    const uint32_t size = read_u32(bytes, at + 4);
    const std::size_t body = at + 8;
    if (body + size > bytes.size()) {
      throw Error(Errc::format_error, "chunk_size: chunk extends past end of file");
    }
    if (tag_is(bytes, at, "fmt ")) {
      if (size < 16) throw Error(Errc::format_error, "fmt_size: fmt chunk shorter than 16 bytes");
      const uint16_t audio_format = read_u16(bytes, body);
      const uint16_t channels = read_u16(bytes, body + 2);
      const uint32_t rate = read_u32(bytes, body + 4);
      const uint16_t bits = read_u16(bytes, body + 14);
      if (audio_format != 1) {
        throw Error(Errc::unsupported_encoding,
                    "audio_format: " + std::to_string(audio_format) + " (only PCM=1)");
      }
      if (bits != 16) {
        throw Error(Errc::unsupported_encoding,
                    "bits_per_sample: " + std::to_string(bits) + " (only 16)");
      }
      if (channels != 1) {
        throw Error(Errc::format_error, "channels: " + std::to_string(channels) + " (only mono)");
      }
      if (rate == 0) throw Error(Errc::format_error, "sample_rate: zero");
      wav.format.sample_rate_hz = static_cast<int>(rate);
      have_fmt = true;
    } else if (tag_is(bytes, at, "data")) {
      if (!have_fmt) throw Error(Errc::format_error, "fmt: data chunk before fmt chunk");
      if (size % 2 != 0) throw Error(Errc::format_error, "data_size: odd byte count");
      wav.samples = from_le_bytes(bytes.subspan(body, size));
      return wav;
    }
    at = body + size + (size & 1u);
  }
  throw Error(Errc::format_error, have_fmt ? "data: missing data chunk" : "fmt: missing fmt chunk");
}

std::vector<uint8_t> write_wav(AudioFormat format, std::span<const int16_t> samples) {
  if (format.sample_rate_hz <= 0) throw Error(Errc::invalid_argument, "sample rate must be positive");
  const auto data_bytes = static_cast<uint32_t>(samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, AudioFormat::channels);
  put_u32(out, static_cast<uint32_t>(format.sample_rate_hz));
  put_u32(out, static_cast<uint32_t>(format.sample_rate_hz * 2));
  put_u16(out, 2);
  put_u16(out, AudioFormat::bit_depth);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  const auto pcm = to_le_bytes(samples);
  out.insert(out.end(), pcm.begin(), pcm.end());
  return out;
}

std::vector<int16_t> make_tone(std::size_t n, int sample_rate_hz, double freq_hz,
                               int16_t amplitude, std::size_t phase_sample) {
  std::vector<int16_t> out(n);
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = round_to_sample(amplitude * std::sin(w * static_cast<double>(phase_sample + i)));
  }
  return out;
}

}  // namespace voice
