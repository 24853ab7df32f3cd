#include "faag/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "faag/error.hpp"

namespace faag {

namespace {

std::uint32_t read_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_at(const std::vector<unsigned char>& b, std::size_t at, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(at));
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (samples_.empty()) throw Error(ErrorCode::kInvalidInput, "waveform must contain at least one sample");
  if (sample_rate_ <= 0) throw Error(ErrorCode::kInvalidInput, "sample rate must be positive");
  for (double s : samples_) {
    if (!std::isfinite(s) || s < -1.0 || s > 1.0)
      throw Error(ErrorCode::kInvalidInput, "sample outside [-1, 1]: " + std::to_string(s));
  }
}

Waveform Waveform::clamped(std::vector<double> samples, int sample_rate) {
  for (double& s : samples) s = std::clamp(s, -1.0, 1.0);
  return Waveform(std::move(samples), sample_rate);
}

Waveform Waveform::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > samples_.size())
    throw Error(ErrorCode::kInvalidInput, "invalid slice [" + std::to_string(begin) + ", " +
                                              std::to_string(end) + ") of " +
                                              std::to_string(samples_.size()) + " samples");
  return Waveform(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                      samples_.begin() + static_cast<std::ptrdiff_t>(end)),
                  sample_rate_);
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || !tag_at(bytes, 0, "RIFF") || !tag_at(bytes, 8, "WAVE"))
    throw Error(ErrorCode::kIo, path.string() + " is not a RIFF/WAVE file");

  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_at(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + 16 > bytes.size())
        throw Error(ErrorCode::kIo, path.string() + ": truncated fmt chunk");
      const auto format = read_u16(bytes, body);
      const auto channels = read_u16(bytes, body + 2);
      const auto bits = read_u16(bytes, body + 14);
      if (format != 1 || channels != 1 || bits != 16)
        throw Error(ErrorCode::kUnsupportedFormat,
                    path.string() + ": need 16-bit mono PCM, got format " + std::to_string(format) +
                        ", " + std::to_string(channels) + " channel(s), " + std::to_string(bits) +
                        " bits");
      sample_rate = static_cast<int>(read_u32(bytes, body + 4));
      have_fmt = true;
    } else if (tag_at(bytes, pos, "data")) {
      if (!have_fmt) throw Error(ErrorCode::kIo, path.string() + ": data chunk before fmt chunk");
      if (body + chunk_size > bytes.size())
        throw Error(ErrorCode::kIo, path.string() + ": truncated data chunk");
      const std::size_t count = chunk_size / 2;
      std::vector<double> samples(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
        samples[i] = static_cast<double>(raw) / kPcmScale;
      }
      if (samples.empty()) throw Error(ErrorCode::kIo, path.string() + ": empty data chunk");
      return Waveform(std::move(samples), sample_rate);
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw Error(ErrorCode::kIo, path.string() + ": no data chunk");
}

std::vector<std::int16_t> to_pcm16(const Waveform& w) {
  std::vector<std::int16_t> out;
  out.reserve(w.size());
  for (double s : w.samples()) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * kPcmScale);
    out.push_back(static_cast<std::int16_t>(std::clamp(scaled, -32767.0, 32767.0)));
  }
  return out;
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
  const auto pcm = to_pcm16(w);
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate()) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (auto s : pcm) put_u16(out, static_cast<std::uint16_t>(s));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

double peak_magnitude(std::span<const double> samples) {
  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  return peak;
}

Loudness loudness_db(std::span<const double> samples) {
  const double peak = peak_magnitude(samples);
  if (peak == 0.0) throw Error(ErrorCode::kSilentAudio, "loudness of silent audio is undefined");
  return {20.0 * std::log10(peak * kLoudnessScale)};
}

Loudness loudness_db(const Waveform& w) { return loudness_db(w.samples()); }

Loudness distortion_db(const Waveform& original, const Waveform& adversarial) {
  if (original.size() != adversarial.size())
    throw Error(ErrorCode::kLengthMismatch, "original has " + std::to_string(original.size()) +
                                                " samples, adversarial has " +
                                                std::to_string(adversarial.size()));
  if (original.sample_rate() != adversarial.sample_rate())
    throw Error(ErrorCode::kRateMismatch, "sample rates differ");
  return {loudness_db(adversarial).db - loudness_db(original).db};
}

Waveform concat(const Waveform& a, const Waveform& b) {
  if (a.sample_rate() != b.sample_rate())
    throw Error(ErrorCode::kRateMismatch, std::to_string(a.sample_rate()) + " Hz vs " +
                                              std::to_string(b.sample_rate()) + " Hz");
  std::vector<double> joined(a.samples().begin(), a.samples().end());
  joined.insert(joined.end(), b.samples().begin(), b.samples().end());
  return Waveform(std::move(joined), a.sample_rate());
}

}  // namespace faag
