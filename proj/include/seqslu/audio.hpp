#pragma once

#include <filesystem>
#include <vector>

#include "seqslu/tensor.hpp"

namespace seqslu {

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr int kFeatureDim = 81;

struct AudioWave {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = kDefaultSampleRate;

  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Mono 16-bit little-endian PCM at 16 kHz only; anything else is a DataError.
AudioWave read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioWave& wave);

struct SpectrogramConfig {
  double frame_length_ms = 20.0;
  double frame_shift_ms = 10.0;
  // Bins are spaced sample_rate / fft_size apart; fft_size / 2 + 1 of them.
  int fft_size = 160;
};

struct Spectrogram {
  Tensor<float> frames;  // T x 81 log magnitudes
  double frame_length_ms = 20.0;
  double frame_shift_ms = 10.0;

  int64_t num_frames() const { return frames.rows(); }
};

int64_t spectrogram_frame_count(int64_t num_samples, int64_t window, int64_t shift);

// Hann-windowed short-time magnitude spectrum, ln(|X| + 1e-6).
//
// The analysis window (320 samples at the defaults) is longer than the
// transform, so each windowed frame is wrapped modulo fft_size before a
// fft_size-point DFT. That evaluates the window's spectrum exactly at
// multiples of sample_rate / fft_size, giving 81 bins 100 Hz apart.
Spectrogram log_spectrogram(const AudioWave& wave, const SpectrogramConfig& cfg = {});

struct FeatureStats {
  std::vector<float> mean;
  std::vector<float> stddev;
};

inline constexpr double kStdFloor = 1e-5;

// Pooled per-dimension mean and standard deviation over all frames.
FeatureStats compute_stats(const std::vector<const Tensor<float>*>& features);
// (x - mean) / max(std, 1e-5) per dimension. Not idempotent.
Spectrogram normalize(const Spectrogram& spec, const FeatureStats& stats);

}  // namespace seqslu
