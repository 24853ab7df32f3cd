#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace faag {

inline constexpr int kDefaultSampleRate = 16000;

// Scale used when reporting loudness: |sample| * kLoudnessScale is the int16
// magnitude that goes into the dB formula.
inline constexpr double kLoudnessScale = 32767.0;

// Scale between normalized samples and 16-bit PCM counts at file boundaries.
inline constexpr double kPcmScale = 32768.0;

// Mono audio with samples normalized to [-1, 1]. Immutable once built.
class Waveform {
 public:
  // Throws InvalidInput when empty, when a sample lies outside [-1, 1] or is
  // not finite, or when sample_rate <= 0.
  explicit Waveform(std::vector<double> samples, int sample_rate = kDefaultSampleRate);

  // Like the constructor but clamps samples into [-1, 1] first.
  static Waveform clamped(std::vector<double> samples, int sample_rate = kDefaultSampleRate);

  std::span<const double> samples() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_[i]; }

  // Samples [begin, end). Throws InvalidInput on an empty or out-of-range slice.
  Waveform slice(std::size_t begin, std::size_t end) const;

  bool operator==(const Waveform&) const = default;

 private:
  std::vector<double> samples_;
  int sample_rate_;
};

struct Loudness {
  double db = 0.0;
};

// RIFF/WAVE, PCM tag 1, 16-bit mono. Samples are divided by 32768.
Waveform read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1], scaled by 32768,
// rounded to nearest and saturated to [-32767, 32767].
void write_wav(const Waveform& w, const std::filesystem::path& path);

std::vector<std::int16_t> to_pcm16(const Waveform& w);

// 20 * log10(max_i |x_i| * 32767). Throws SilentAudio when every sample is 0.
Loudness loudness_db(const Waveform& w);
Loudness loudness_db(std::span<const double> samples);

// loudness_db(adversarial) - loudness_db(original).
Loudness distortion_db(const Waveform& original, const Waveform& adversarial);

Waveform concat(const Waveform& a, const Waveform& b);

double peak_magnitude(std::span<const double> samples);

}  // namespace faag
