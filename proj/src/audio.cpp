#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "seqslu/audio.hpp"
#include "seqslu/errors.hpp"

namespace seqslu {

int64_t spectrogram_frame_count(int64_t num_samples, int64_t window, int64_t shift) {
  if (num_samples < window) return 0;
  return 1 + (num_samples - window) / shift;
}

Spectrogram log_spectrogram(const AudioWave& wave, const SpectrogramConfig& cfg) {
  if (wave.sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (cfg.fft_size < 2) throw std::invalid_argument("fft_size must be at least 2");
  const auto window = static_cast<int64_t>(std::lround(wave.sample_rate * cfg.frame_length_ms / 1000.0));
  const auto shift = static_cast<int64_t>(std::lround(wave.sample_rate * cfg.frame_shift_ms / 1000.0));
  if (window < 1 || shift < 1) throw std::invalid_argument("frame length and shift must be positive");
  const int64_t n = static_cast<int64_t>(wave.samples.size());
  const int64_t frames = spectrogram_frame_count(n, window, shift);
  if (frames < 1) {
    throw DataError("audio of " + std::to_string(n) + " samples is shorter than one " +
                    std::to_string(window) + "-sample window");
  }

  const int64_t fft = cfg.fft_size;
  const int64_t bins = fft / 2 + 1;
  using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::vector<double> hann(static_cast<size_t>(window));
  for (int64_t i = 0; i < window; ++i) {
    hann[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / window);
  }
  MatD cos_t(fft, bins), sin_t(fft, bins);
  for (int64_t j = 0; j < fft; ++j) {
    for (int64_t k = 0; k < bins; ++k) {
      // Reduce the phase index first so the table stays exact for large j*k.
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((j * k) % fft) / fft;
      cos_t(j, k) = std::cos(angle);
      sin_t(j, k) = std::sin(angle);
    }
  }

  MatD folded = MatD::Zero(frames, fft);
  for (int64_t t = 0; t < frames; ++t) {
    const float* src = wave.samples.data() + t * shift;
    for (int64_t i = 0; i < window; ++i) folded(t, i % fft) += hann[static_cast<size_t>(i)] * src[i];
  }
  const MatD re = folded * cos_t;
  const MatD im = folded * sin_t;

  Spectrogram spec;
  spec.frame_length_ms = cfg.frame_length_ms;
  spec.frame_shift_ms = cfg.frame_shift_ms;
  spec.frames = Tensor<float>({frames, bins});
  for (int64_t t = 0; t < frames; ++t) {
    for (int64_t k = 0; k < bins; ++k) {
      const double mag = std::sqrt(re(t, k) * re(t, k) + im(t, k) * im(t, k));
      spec.frames(t, k) = static_cast<float>(std::log(mag + 1e-6));
    }
  }
  return spec;
}

FeatureStats compute_stats(const std::vector<const Tensor<float>*>& features) {
  if (features.empty()) throw std::invalid_argument("compute_stats: no features");
  const int64_t d = features.front()->cols();
  std::vector<double> s(static_cast<size_t>(d), 0.0), s2(static_cast<size_t>(d), 0.0);
  int64_t count = 0;
  for (const auto* f : features) {
    if (f->cols() != d) throw std::invalid_argument("compute_stats: feature dimension mismatch");
    for (int64_t t = 0; t < f->rows(); ++t) {
      for (int64_t k = 0; k < d; ++k) {
        const double v = (*f)(t, k);
        s[static_cast<size_t>(k)] += v;
        s2[static_cast<size_t>(k)] += v * v;
      }
    }
    count += f->rows();
  }
  FeatureStats stats;
  for (int64_t k = 0; k < d; ++k) {
    const double mean = s[static_cast<size_t>(k)] / count;
    const double var = std::max(0.0, s2[static_cast<size_t>(k)] / count - mean * mean);
    stats.mean.push_back(static_cast<float>(mean));
    stats.stddev.push_back(static_cast<float>(std::sqrt(var)));
  }
  return stats;
}

Spectrogram normalize(const Spectrogram& spec, const FeatureStats& stats) {
  const int64_t d = spec.frames.cols();
  if (static_cast<int64_t>(stats.mean.size()) != d || static_cast<int64_t>(stats.stddev.size()) != d) {
    throw std::invalid_argument("normalize: stats have dimension " + std::to_string(stats.mean.size()) +
                                ", features have " + std::to_string(d));
  }
  Spectrogram out = spec;
  for (int64_t t = 0; t < out.frames.rows(); ++t) {
    for (int64_t k = 0; k < d; ++k) {
      const double sd = std::max(static_cast<double>(stats.stddev[static_cast<size_t>(k)]), kStdFloor);
      out.frames(t, k) = static_cast<float>((out.frames(t, k) - stats.mean[static_cast<size_t>(k)]) / sd);
    }
  }
  return out;
}

}  // namespace seqslu
