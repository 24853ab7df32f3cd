#include "faag/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <vector>

#include <zlib.h>

#include "faag/error.hpp"

namespace faag {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'A', 'A', 'G', 'M', 'D', 'L', '1'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8;
constexpr std::uint32_t kMaxDim = 1u << 16;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, double bound, std::mt19937_64& rng) {
  // Row-major draw order, independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<double>(static_cast<float>((2.0 * uniform01(rng) - 1.0) * bound));
}

template <typename Derived>
void round_float(Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(static_cast<float>(m(r, c)));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::vector<unsigned char>& b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

template <typename Derived>
void put_tensor(std::vector<unsigned char>& out, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
}

template <typename Derived>
void get_tensor(const std::vector<unsigned char>& b, std::size_t& at, Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(b, at, 4))));
      at += 4;
    }
}

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(n)));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

bool AcousticModel::operator==(const AcousticModel& o) const {
  return input_dim == o.input_dim && hidden_dim == o.hidden_dim && seed == o.seed &&
         w_in == o.w_in && w_rec == o.w_rec && b_rec == o.b_rec && w_out == o.w_out &&
         b_out == o.b_out;
}

ModelGradients ModelGradients::zeros_like(const AcousticModel& m) {
  return {Eigen::MatrixXd::Zero(m.w_in.rows(), m.w_in.cols()),
          Eigen::MatrixXd::Zero(m.w_rec.rows(), m.w_rec.cols()),
          Eigen::VectorXd::Zero(m.b_rec.size()),
          Eigen::MatrixXd::Zero(m.w_out.rows(), m.w_out.cols()),
          Eigen::VectorXd::Zero(m.b_out.size())};
}

AcousticModel init_model(int input_dim, int hidden_dim, std::uint64_t seed, int class_count) {
  if (input_dim <= 0 || hidden_dim <= 0 || class_count <= 1)
    throw Error(ErrorCode::kInvalidDim, "model dimensions must be positive (input " +
                                            std::to_string(input_dim) + ", hidden " +
                                            std::to_string(hidden_dim) + ")");
  AcousticModel m;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.seed = seed;
  m.w_in.resize(hidden_dim, input_dim);
  m.w_rec.resize(hidden_dim, hidden_dim);
  m.w_out.resize(class_count, hidden_dim);
  m.b_rec = Eigen::VectorXd::Zero(hidden_dim);
  m.b_out = Eigen::VectorXd::Zero(class_count);

  std::mt19937_64 rng(seed);
  fill_uniform(m.w_in, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  fill_uniform(m.w_rec, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  fill_uniform(m.w_out, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  return m;
}

void round_to_float(AcousticModel& m) {
  round_float(m.w_in);
  round_float(m.w_rec);
  round_float(m.b_rec);
  round_float(m.w_out);
  round_float(m.b_out);
}

ForwardResult forward(const AcousticModel& m, const FeatureMatrix& features) {
  if (features.cols() != m.input_dim)
    throw Error(ErrorCode::kDimMismatch, "features have " + std::to_string(features.cols()) +
                                             " columns, model expects " + std::to_string(m.input_dim));
  if (features.rows() == 0) throw Error(ErrorCode::kTooShort, "feature matrix has no windows");
  const Eigen::Index steps = features.rows();

  ForwardResult out;
  RowMatrix pre = features * m.w_in.transpose();
  pre.rowwise() += m.b_rec.transpose();
  out.hidden.resize(steps, m.hidden_dim);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden_dim);
  for (Eigen::Index t = 0; t < steps; ++t) {
    h = (pre.row(t).transpose() + m.w_rec * h).array().tanh().matrix();
    out.hidden.row(t) = h.transpose();
  }
  out.logits = out.hidden * m.w_out.transpose();
  out.logits.rowwise() += m.b_out.transpose();
  return out;
}

BackwardResult backward(const AcousticModel& m, const FeatureMatrix& features,
                        const ForwardResult& trace, const LogitMatrix& grad_logits,
                        GradientTargets targets) {
  const Eigen::Index steps = features.rows();
  if (features.cols() != m.input_dim || trace.hidden.rows() != steps ||
      trace.hidden.cols() != m.hidden_dim || grad_logits.rows() != steps ||
      grad_logits.cols() != m.class_count())
    throw Error(ErrorCode::kShapeMismatch, "backward inputs do not match the forward pass");

  // Gradient w.r.t. the tanh pre-activations, accumulated back to front.
  RowMatrix grad_pre(steps, m.hidden_dim);
  const RowMatrix grad_hidden_out = grad_logits * m.w_out;
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(m.hidden_dim);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Eigen::VectorXd h = trace.hidden.row(t).transpose();
    const Eigen::VectorXd dh = grad_hidden_out.row(t).transpose() + carry;
    const Eigen::VectorXd da = (dh.array() * (1.0 - h.array().square())).matrix();
    grad_pre.row(t) = da.transpose();
    carry.noalias() = m.w_rec.transpose() * da;
  }

  BackwardResult out;
  out.input_grad = grad_pre * m.w_in;
  if (targets == GradientTargets::kInputsOnly) return out;

  out.params.w_out = grad_logits.transpose() * trace.hidden;
  out.params.b_out = grad_logits.colwise().sum().transpose();
  out.params.w_in = grad_pre.transpose() * features;
  out.params.b_rec = grad_pre.colwise().sum().transpose();
  out.params.w_rec = Eigen::MatrixXd::Zero(m.hidden_dim, m.hidden_dim);
  if (steps > 1)
    out.params.w_rec = grad_pre.bottomRows(steps - 1).transpose() * trace.hidden.topRows(steps - 1);
  return out;
}

std::vector<int> best_path(const LogitMatrix& logits) {
  std::vector<int> path(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(t, k) > logits(t, best)) best = k;
    path[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return path;
}

std::string greedy_decode(const LogitMatrix& logits) {
  const int blank = static_cast<int>(logits.cols()) - 1;
  std::string text;
  int previous = -1;
  for (int k : best_path(logits)) {
    if (k != previous && k != blank) text.push_back(Alphabet::symbol(k));
    previous = k;
  }
  return text;
}

std::string transcribe(const AcousticModel& m, const MfccFrontEnd& front_end,
                       std::span<const double> samples) {
  return greedy_decode(forward(m, front_end.forward(samples)).logits);
}

std::string transcribe(const AcousticModel& m, const Waveform& x, const FrameParams& p) {
  return transcribe(m, MfccFrontEnd(p, x.sample_rate()), x.samples());
}

void save_model(const AcousticModel& m, const std::filesystem::path& path) {
  if (m.class_count() != Alphabet::kClassCount)
    throw Error(ErrorCode::kInvalidDim, "only 28-class models can be saved");
  std::vector<unsigned char> out(kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(m.input_dim));
  put_u32(out, static_cast<std::uint32_t>(m.hidden_dim));
  put_u64(out, m.seed);
  put_tensor(out, m.w_in);
  put_tensor(out, m.w_rec);
  put_tensor(out, m.b_rec);
  put_tensor(out, m.w_out);
  put_tensor(out, m.b_out);
  put_u32(out, crc_of(out.data(), out.size()));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

AcousticModel load_model(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(ErrorCode::kFormatVersionMismatch, path.string() + " is not a FAAGMDL1 model file");
  if (bytes.size() < kHeaderBytes + 4)
    throw Error(ErrorCode::kFormatVersionMismatch, path.string() + " is truncated");

  const auto input_dim = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  const auto hidden_dim = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
  const std::uint64_t seed = get_le(bytes, 16, 8);
  if (input_dim == 0 || hidden_dim == 0 || input_dim > kMaxDim || hidden_dim > kMaxDim)
    throw Error(ErrorCode::kFormatVersionMismatch, path.string() + ": implausible dimensions");

  const std::uint64_t h = hidden_dim;
  const std::uint64_t floats = h * input_dim + h * h + h + h * Alphabet::kClassCount + Alphabet::kClassCount;
  const std::uint64_t expected = kHeaderBytes + 4 * floats + 4;
  if (bytes.size() != expected)
    throw Error(ErrorCode::kFormatVersionMismatch, path.string() + " has " +
                                                       std::to_string(bytes.size()) + " bytes, expected " +
                                                       std::to_string(expected));
  const auto stored_crc = static_cast<std::uint32_t>(get_le(bytes, bytes.size() - 4, 4));
  if (stored_crc != crc_of(bytes.data(), bytes.size() - 4))
    throw Error(ErrorCode::kChecksumMismatch, path.string() + ": CRC32 does not match contents");

  AcousticModel m;
  m.input_dim = static_cast<int>(input_dim);
  m.hidden_dim = static_cast<int>(hidden_dim);
  m.seed = seed;
  m.w_in.resize(m.hidden_dim, m.input_dim);
  m.w_rec.resize(m.hidden_dim, m.hidden_dim);
  m.b_rec.resize(m.hidden_dim);
  m.w_out.resize(Alphabet::kClassCount, m.hidden_dim);
  m.b_out.resize(Alphabet::kClassCount);
  std::size_t at = kHeaderBytes;
  get_tensor(bytes, at, m.w_in);
  get_tensor(bytes, at, m.w_rec);
  get_tensor(bytes, at, m.b_rec);
  get_tensor(bytes, at, m.w_out);
  get_tensor(bytes, at, m.b_out);
  return m;
}

std::uint32_t model_file_crc(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  return crc_of(bytes.data(), bytes.size());
}

}  // namespace faag
