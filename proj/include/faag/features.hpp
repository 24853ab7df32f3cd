#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "faag/audio.hpp"

namespace faag {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// T x n_coeffs, one row per analysis window.
using FeatureMatrix = RowMatrix;

// Floor inside log(energy + eps).
inline constexpr double kLogFloor = 1e-8;

struct FrameParams {
  int window_size = 512;  // samples per analysis window
  int step = 320;         // hop between consecutive windows
  int n_mels = 26;
  int n_coeffs = 13;

  // Throws InvalidInput unless 0 < step <= window_size and 0 < n_coeffs <= n_mels.
  void validate() const;

  bool operator==(const FrameParams&) const = default;
};

// floor((len - window) / step) + 1. Throws TooShort when len < window.
std::size_t frame_count(std::size_t len_samples, const FrameParams& p);

// Hann window -> power spectrum -> triangular mel filterbank -> log -> DCT-II.
// Holds precomputed tables and FFT plans; const methods are thread-safe.
class MfccFrontEnd {
 public:
  // Per-window intermediates kept by forward() for an exact backward pass.
  struct Cache {
    std::vector<std::complex<double>> spectra;  // T x (window/2 + 1)
    RowMatrix mel_energies;                     // T x n_mels, before the log floor
  };

  MfccFrontEnd(const FrameParams& p, int sample_rate);
  ~MfccFrontEnd();
  MfccFrontEnd(MfccFrontEnd&&) noexcept;
  MfccFrontEnd& operator=(MfccFrontEnd&&) noexcept;

  const FrameParams& params() const { return params_; }
  int sample_rate() const { return sample_rate_; }

  FeatureMatrix forward(std::span<const double> samples, Cache* cache = nullptr) const;

  // Vector-Jacobian product: d(sum grad .* features)/d(samples). Overlapping
  // windows accumulate. Throws ShapeMismatch when grad does not match cache.
  std::vector<double> backward(std::size_t n_samples, const Cache& cache,
                               const FeatureMatrix& grad) const;

  // log(mel energy + eps) before the DCT, T x n_mels.
  RowMatrix log_mel_energies(std::span<const double> samples) const;

  // n_mels x (window/2 + 1) triangle weights.
  const RowMatrix& filterbank() const { return filterbank_; }
  // Peak frequency (Hz) of each mel triangle.
  const std::vector<double>& center_frequencies() const { return centers_hz_; }

 private:
  struct Plans;

  FrameParams params_;
  int sample_rate_;
  std::vector<double> hann_;
  RowMatrix filterbank_;
  RowMatrix dct_;  // n_coeffs x n_mels, orthonormal DCT-II rows
  std::vector<double> centers_hz_;
  std::unique_ptr<Plans> plans_;
};

FeatureMatrix mfcc_forward(const Waveform& x, const FrameParams& p);

// Returns d<grad, mfcc_forward(x)>/dx. Throws ShapeMismatch on a grad of the
// wrong shape.
std::vector<double> mfcc_backward(const Waveform& x, const FrameParams& p,
                                  const FeatureMatrix& grad_features);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace faag
