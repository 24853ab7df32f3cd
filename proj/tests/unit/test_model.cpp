#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "faag/error.hpp"
#include "faag/model.hpp"

using namespace faag;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

RowMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  RowMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

// Scalar probe loss <G, logits>.
double probe(const AcousticModel& m, const FeatureMatrix& f, const RowMatrix& g) {
  return (forward(m, f).logits.array() * g.array()).sum();
}

double rel(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0 ? 0 : std::sqrt(d) / scale;
}

template <typename M>
void fd_param(AcousticModel& m, M& param, const FeatureMatrix& f, const RowMatrix& g,
              std::vector<double>& numeric) {
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double keep = param.data()[i];
    param.data()[i] = keep + h;
    const double up = probe(m, f, g);
    param.data()[i] = keep - h;
    const double down = probe(m, f, g);
    param.data()[i] = keep;
    numeric.push_back((up - down) / (2 * h));
  }
}

template <typename M>
void append(const M& m, std::vector<double>& out) {
  out.insert(out.end(), m.data(), m.data() + m.size());
}

LogitMatrix path_logits(const std::vector<int>& path) {
  LogitMatrix l = LogitMatrix::Zero(static_cast<Eigen::Index>(path.size()), Alphabet::kClassCount);
  for (std::size_t t = 0; t < path.size(); ++t) l(static_cast<Eigen::Index>(t), path[t]) = 5.0;
  return l;
}

}  // namespace

TEST_CASE("init is seeded and validated") {
  const auto a = init_model(13, 16, 5);
  const auto b = init_model(13, 16, 5);
  const auto c = init_model(13, 16, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.b_rec.isZero());
  CHECK(a.b_out.isZero());
  CHECK(a.w_in.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(13.0));
  CHECK(a.w_rec.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(16.0));
  CHECK(a.w_out.rows() == 28);
  CHECK(code_of([] { init_model(13, 0, 1); }) == ErrorCode::kInvalidDim);
  CHECK(code_of([] { init_model(0, 8, 1); }) == ErrorCode::kInvalidDim);
}

TEST_CASE("forward shapes and degenerate weights") {
  auto m = init_model(4, 6, 1);
  std::mt19937_64 rng(1);
  const FeatureMatrix f1 = random_matrix(1, 4, rng);
  CHECK(forward(m, f1).logits.rows() == 1);
  CHECK(code_of([&] { forward(m, random_matrix(3, 5, rng)); }) == ErrorCode::kDimMismatch);

  m.w_in.setZero();
  m.w_rec.setZero();
  m.w_out.setZero();
  for (int k = 0; k < 28; ++k) m.b_out(k) = 0.1 * k;
  const auto r = forward(m, random_matrix(5, 4, rng));
  for (Eigen::Index t = 0; t < 5; ++t) CHECK(r.logits.row(t).transpose() == m.b_out);

  const auto m2 = init_model(4, 6, 2);
  const FeatureMatrix f = random_matrix(7, 4, rng);
  CHECK(forward(m2, f).logits == forward(m2, f).logits);
}

TEST_CASE("backward: zero upstream gradient") {
  const auto m = init_model(4, 6, 3);
  std::mt19937_64 rng(3);
  const FeatureMatrix f = random_matrix(5, 4, rng);
  const auto fwd = forward(m, f);
  const auto back = backward(m, f, fwd, LogitMatrix::Zero(5, 28));
  CHECK(back.input_grad.isZero());
  CHECK(back.params.w_in.isZero());
  CHECK(back.params.w_rec.isZero());
  CHECK(back.params.w_out.isZero());
  CHECK(back.params.b_rec.isZero());
  CHECK(back.params.b_out.isZero());
  CHECK(code_of([&] { backward(m, f, fwd, LogitMatrix::Zero(4, 28)); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("backward matches central differences on 20 instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> t_dist(1, 5), h_dist(1, 8), d_dist(1, 6);
  double worst_param = 0, worst_input = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int T = t_dist(rng), hidden = h_dist(rng), in = d_dist(rng);
    auto m = init_model(in, hidden, 1000 + inst);
    // Nonzero biases so their gradients are exercised away from the origin.
    m.b_rec = Eigen::VectorXd::Random(hidden) * 0.3;
    m.b_out = Eigen::VectorXd::Random(28) * 0.3;
    FeatureMatrix f = random_matrix(T, in, rng);
    const RowMatrix g = random_matrix(T, 28, rng);
    const auto fwd = forward(m, f);
    const auto back = backward(m, f, fwd, g);

    std::vector<double> analytic, numeric;
    append(back.params.w_in, analytic);
    append(back.params.w_rec, analytic);
    append(back.params.b_rec, analytic);
    append(back.params.w_out, analytic);
    append(back.params.b_out, analytic);
    fd_param(m, m.w_in, f, g, numeric);
    fd_param(m, m.w_rec, f, g, numeric);
    fd_param(m, m.b_rec, f, g, numeric);
    fd_param(m, m.w_out, f, g, numeric);
    fd_param(m, m.b_out, f, g, numeric);
    worst_param = std::max(worst_param, rel(analytic, numeric));

    std::vector<double> ia, in_num;
    append(back.input_grad, ia);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double keep = f.data()[i];
      f.data()[i] = keep + h;
      const double up = probe(m, f, g);
      f.data()[i] = keep - h;
      const double down = probe(m, f, g);
      f.data()[i] = keep;
      in_num.push_back((up - down) / (2 * h));
    }
    worst_input = std::max(worst_input, rel(ia, in_num));

    const auto only = backward(m, f, fwd, g, GradientTargets::kInputsOnly);
    CHECK(only.input_grad.isApprox(back.input_grad, 1e-14));
  }
  CHECK(worst_param < 1e-4);
  CHECK(worst_input < 1e-4);
}

TEST_CASE("greedy decode examples") {
  const int a = 0, b = 1, blank = Alphabet::kBlank;
  CHECK(greedy_decode(path_logits({a, a, blank, b})) == "ab");
  CHECK(greedy_decode(path_logits({blank, blank})) == "");
  CHECK(greedy_decode(path_logits({a, blank, a})) == "aa");
  // Ties go to the lowest index.
  CHECK(greedy_decode(LogitMatrix::Zero(3, 28)) == "a");
  CHECK(best_path(LogitMatrix::Zero(2, 28)) == std::vector<int>{0, 0});
}

TEST_CASE("greedy decode length never exceeds T") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index T = 1 + trial % 9;
    CHECK(greedy_decode(random_matrix(T, 28, rng)).size() <= static_cast<std::size_t>(T));
  }
}

TEST_CASE("decode is invariant to logit changes that keep the argmax") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    LogitMatrix l = random_matrix(6, 28, rng);
    const auto before = greedy_decode(l);
    l.array() += 3.0;
    LogitMatrix scaled = l * 2.5;
    CHECK(greedy_decode(l) == before);
    CHECK(greedy_decode(scaled) == before);
  }
}

TEST_CASE("save and load round trip") {
  const auto dir = fs::temp_directory_path();
  auto m = init_model(13, 10, 42);
  m.b_out(3) = 0.25f;
  const auto path = dir / "faag_test_model.faag";
  save_model(m, path);
  CHECK(load_model(path) == m);
  CHECK(fs::file_size(path) == 8 + 4 + 4 + 8 + 4 * (10 * 13 + 10 * 10 + 10 + 28 * 10 + 28) + 4);
  CHECK(model_file_crc(path) == model_file_crc(path));

  std::vector<char> bytes(fs::file_size(path));
  std::ifstream(path, std::ios::binary).read(bytes.data(), static_cast<std::streamsize>(bytes.size()));

  const auto truncated = dir / "faag_test_truncated.faag";
  std::ofstream(truncated, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  const auto tc = code_of([&] { load_model(truncated); });
  CHECK((tc == ErrorCode::kFormatVersionMismatch || tc == ErrorCode::kChecksumMismatch));

  auto magic = bytes;
  magic[0] = 'X';
  const auto bad_magic = dir / "faag_test_magic.faag";
  std::ofstream(bad_magic, std::ios::binary).write(magic.data(), static_cast<std::streamsize>(magic.size()));
  CHECK(code_of([&] { load_model(bad_magic); }) == ErrorCode::kFormatVersionMismatch);

  auto flipped = bytes;
  flipped[40] ^= 0x10;
  const auto corrupt = dir / "faag_test_corrupt.faag";
  std::ofstream(corrupt, std::ios::binary).write(flipped.data(), static_cast<std::streamsize>(flipped.size()));
  CHECK(code_of([&] { load_model(corrupt); }) == ErrorCode::kChecksumMismatch);

  CHECK(code_of([&] { load_model(dir / "faag_no_such_model.faag"); }) == ErrorCode::kIo);
}
