#include "faag/features.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "faag/error.hpp"

namespace faag {

namespace {

// FFTW planning is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct MfccFrontEnd::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  explicit Plans(int n) {
    std::vector<double> real(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
    auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
    std::lock_guard lock(planner_mutex());
    r2c = fftw_plan_dft_r2c_1d(n, real.data(), cplx, FFTW_ESTIMATE | FFTW_UNALIGNED);
    c2r = fftw_plan_dft_c2r_1d(n, cplx, real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

void FrameParams::validate() const {
  if (window_size <= 0 || step <= 0 || step > window_size)
    throw Error(ErrorCode::kInvalidInput, "need 0 < step <= window_size, got step " +
                                              std::to_string(step) + ", window " +
                                              std::to_string(window_size));
  if (n_mels <= 0 || n_coeffs <= 0 || n_coeffs > n_mels)
    throw Error(ErrorCode::kInvalidInput, "need 0 < n_coeffs <= n_mels");
}

std::size_t frame_count(std::size_t len_samples, const FrameParams& p) {
  const auto window = static_cast<std::size_t>(p.window_size);
  if (len_samples < window)
    throw Error(ErrorCode::kTooShort, std::to_string(len_samples) + " samples is shorter than one " +
                                          std::to_string(window) + "-sample window");
  return (len_samples - window) / static_cast<std::size_t>(p.step) + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MfccFrontEnd::MfccFrontEnd(const FrameParams& p, int sample_rate)
    : params_(p), sample_rate_(sample_rate) {
  p.validate();
  if (sample_rate <= 0) throw Error(ErrorCode::kInvalidInput, "sample rate must be positive");
  const int n = p.window_size;
  const int bins = n / 2 + 1;

  hann_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    hann_[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);

  // Triangles with edges equally spaced on the mel scale from 0 Hz to Nyquist.
  const double top_mel = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(p.n_mels + 2));
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top_mel * static_cast<double>(i) / static_cast<double>(p.n_mels + 1));
  filterbank_ = RowMatrix::Zero(p.n_mels, bins);
  centers_hz_.resize(static_cast<std::size_t>(p.n_mels));
  for (int m = 0; m < p.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    centers_hz_[static_cast<std::size_t>(m)] = mid;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      filterbank_(m, k) = std::max(0.0, w);
    }
  }

  dct_.resize(p.n_coeffs, p.n_mels);
  for (int j = 0; j < p.n_coeffs; ++j) {
    const double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / p.n_mels);
    for (int m = 0; m < p.n_mels; ++m)
      dct_(j, m) = scale * std::cos(std::numbers::pi * j * (2.0 * m + 1.0) / (2.0 * p.n_mels));
  }

  plans_ = std::make_unique<Plans>(n);
}

MfccFrontEnd::~MfccFrontEnd() = default;
MfccFrontEnd::MfccFrontEnd(MfccFrontEnd&&) noexcept = default;
MfccFrontEnd& MfccFrontEnd::operator=(MfccFrontEnd&&) noexcept = default;

FeatureMatrix MfccFrontEnd::forward(std::span<const double> samples, Cache* cache) const {
  const std::size_t frames = frame_count(samples.size(), params_);
  const auto n = static_cast<std::size_t>(params_.window_size);
  const auto step = static_cast<std::size_t>(params_.step);
  const std::size_t bins = n / 2 + 1;

  RowMatrix power(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spectrum(bins);
  if (cache) cache->spectra.resize(frames * bins);

  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = samples.data() + t * step;
    for (std::size_t i = 0; i < n; ++i) frame[i] = src[i] * hann_[i];
    fftw_execute_dft_r2c(plans_->r2c, frame.data(), reinterpret_cast<fftw_complex*>(spectrum.data()));
    for (std::size_t k = 0; k < bins; ++k)
      power(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = std::norm(spectrum[k]);
    if (cache) std::copy(spectrum.begin(), spectrum.end(), cache->spectra.begin() + static_cast<std::ptrdiff_t>(t * bins));
  }

  RowMatrix mel = power * filterbank_.transpose();
  RowMatrix log_mel = (mel.array() + kLogFloor).log().matrix();
  if (cache) cache->mel_energies = std::move(mel);
  return log_mel * dct_.transpose();
}

std::vector<double> MfccFrontEnd::backward(std::size_t n_samples, const Cache& cache,
                                           const FeatureMatrix& grad) const {
  const auto n = static_cast<std::size_t>(params_.window_size);
  const auto step = static_cast<std::size_t>(params_.step);
  const std::size_t bins = n / 2 + 1;
  const std::size_t frames = frame_count(n_samples, params_);
  if (static_cast<std::size_t>(grad.rows()) != frames || grad.cols() != params_.n_coeffs ||
      static_cast<std::size_t>(cache.mel_energies.rows()) != frames ||
      cache.spectra.size() != frames * bins)
    throw Error(ErrorCode::kShapeMismatch,
                "feature gradient is " + std::to_string(grad.rows()) + "x" +
                    std::to_string(grad.cols()) + ", expected " + std::to_string(frames) + "x" +
                    std::to_string(params_.n_coeffs));

  const RowMatrix grad_log = grad * dct_;
  const RowMatrix grad_mel = (grad_log.array() / (cache.mel_energies.array() + kLogFloor)).matrix();
  const RowMatrix grad_power = grad_mel * filterbank_;

  std::vector<double> out(n_samples, 0.0);
  std::vector<std::complex<double>> weighted(bins);
  std::vector<double> time(n);
  const bool even = n % 2 == 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::complex<double>* spec = cache.spectra.data() + t * bins;
    for (std::size_t k = 0; k < bins; ++k)
      weighted[k] = grad_power(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) * spec[k];
    // dP_k/du_n = 2 Re(conj(X_k) e^{-2 pi i k n / N}); summing over the half
    // spectrum is a c2r transform once the DC and Nyquist terms, which c2r
    // counts once instead of twice, are added back.
    const double dc = weighted[0].real();
    const double nyquist = even ? weighted[bins - 1].real() : 0.0;
    fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(weighted.data()), time.data());
    double* dst = out.data() + t * step;
    for (std::size_t i = 0; i < n; ++i) {
      const double alternating = (i % 2 == 0) ? nyquist : -nyquist;
      dst[i] += hann_[i] * (time[i] + dc + alternating);
    }
  }
  return out;
}

RowMatrix MfccFrontEnd::log_mel_energies(std::span<const double> samples) const {
  Cache cache;
  forward(samples, &cache);
  return (cache.mel_energies.array() + kLogFloor).log().matrix();
}

FeatureMatrix mfcc_forward(const Waveform& x, const FrameParams& p) {
  return MfccFrontEnd(p, x.sample_rate()).forward(x.samples());
}

std::vector<double> mfcc_backward(const Waveform& x, const FrameParams& p,
                                  const FeatureMatrix& grad_features) {
  MfccFrontEnd front_end(p, x.sample_rate());
  MfccFrontEnd::Cache cache;
  front_end.forward(x.samples(), &cache);
  return front_end.backward(x.size(), cache, grad_features);
}

}  // namespace faag
