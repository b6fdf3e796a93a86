#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace voice {

inline constexpr int kMicSampleRate = 16000;
inline constexpr int kTtsSampleRate = 24000;

// PCM stream description. Only 16-bit little-endian mono is supported on any
// path, so those fields are constants.
struct AudioFormat {
  static constexpr int bit_depth = 16;
  static constexpr int channels = 1;
  int sample_rate_hz = kMicSampleRate;

  friend bool operator==(const AudioFormat&, const AudioFormat&) = default;
};

struct AudioFrame {
  std::vector<int16_t> samples;
  int sample_rate_hz = kMicSampleRate;
  int channels = 1;
  double timestamp_ms = 0.0;

  double duration_ms() const {
    return sample_rate_hz > 0 ? 1000.0 * static_cast<double>(samples.size()) / sample_rate_hz
                              : 0.0;
  }
  std::size_t byte_size() const { return samples.size() * sizeof(int16_t); }
};

// Samples per chunk for the given rate and duration; throws invalid-argument
// unless the product is a positive whole number of samples.
std::size_t samples_per_chunk(int sample_rate_hz, int chunk_ms);

// Splits samples into chunk_ms frames. The last frame may be short; frame k is
// stamped start_ms + k * chunk_ms.
std::vector<AudioFrame> chunk_stream(std::span<const int16_t> samples, AudioFormat format,
                                     int chunk_ms, double start_ms = 0.0);

// Linear-interpolation sample-rate conversion. Output index i samples the input
// at position i * from_hz / to_hz; positions at or past the last sample clamp
// to it. Values round half away from zero.
std::vector<int16_t> resample_linear(std::span<const int16_t> samples, int from_hz, int to_hz);

// Expected output length of resample_linear: round(n * to / from).
std::size_t resampled_length(std::size_t n, int from_hz, int to_hz);

std::vector<uint8_t> to_le_bytes(std::span<const int16_t> samples);
// Throws protocol-error on an odd byte count.
std::vector<int16_t> from_le_bytes(std::span<const uint8_t> bytes);

struct WavData {
  AudioFormat format;
  std::vector<int16_t> samples;
};

// RIFF/WAVE, PCM 16-bit mono only. Errors name the offending header field.
WavData read_wav(std::span<const uint8_t> bytes);
std::vector<uint8_t> write_wav(AudioFormat format, std::span<const int16_t> samples);

// 440 Hz style test tone, continuous phase from `phase_sample`.
std::vector<int16_t> make_tone(std::size_t n, int sample_rate_hz, double freq_hz,
                               int16_t amplitude, std::size_t phase_sample = 0);

}  // namespace voice
