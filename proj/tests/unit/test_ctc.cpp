#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "faag/ctc.hpp"
#include "faag/error.hpp"

using namespace faag;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

LogitMatrix random_logits(Eigen::Index T, Eigen::Index C, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> n01;
  LogitMatrix l(T, C);
  for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = scale * n01(rng);
  return l;
}

}  // namespace

TEST_CASE("hand-enumerated fixtures") {
  const LogitMatrix one = LogitMatrix::Zero(1, 2);
  CHECK(ctc_loss(one, {{0}}).loss == doctest::Approx(0.693147).epsilon(1e-6));

  const LogitMatrix two = LogitMatrix::Zero(2, 2);
  CHECK(ctc_loss(two, {{0}}).loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(ctc_loss(two, {{0}}).loss == doctest::Approx(0.287682).epsilon(1e-6));

  const LogitMatrix three = LogitMatrix::Zero(3, 2);
  CHECK(ctc_loss(three, {{0, 0}}).loss == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(ctc_loss_bruteforce(three, {{0, 0}}) == doctest::Approx(2.07944).epsilon(1e-5));

  LogitMatrix row(1, 4);
  row << 0.3, -1.0, 2.0, 0.5;
  const double lse = std::log(row.array().exp().sum());
  CHECK(ctc_loss(row, {{}}).loss == doctest::Approx(-(0.5 - lse)).epsilon(1e-12));
}

TEST_CASE("unalignable and malformed inputs") {
  const LogitMatrix two = LogitMatrix::Zero(2, 2);
  CHECK(code_of([&] { ctc_loss(two, {{0, 0}}); }) == ErrorCode::kUnalignable);
  CHECK(code_of([&] { ctc_loss_bruteforce(two, {{0, 0}}); }) == ErrorCode::kUnalignable);
  CHECK(code_of([] { ctc_loss(LogitMatrix(0, 3), {{0}}); }) == ErrorCode::kEmptyLogits);
  CHECK(code_of([&] { ctc_loss(two, {{1}}); }) == ErrorCode::kInvalidInput);
  CHECK(code_of([] { ctc_loss_bruteforce(LogitMatrix::Zero(9, 2), {{0}}); }) == ErrorCode::kTooLarge);
  CHECK(code_of([] { ctc_loss_bruteforce(LogitMatrix::Zero(2, 7), {{0}}); }) == ErrorCode::kTooLarge);
  CHECK(min_alignment_length(std::vector<int>{0, 0, 1, 1, 1}) == 8);
  CHECK(min_alignment_length(std::vector<int>{}) == 0);
}

TEST_CASE("forward-backward agrees with path enumeration") {
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int T = 1; T <= 6; ++T)
    for (int C = 2; C <= 4; ++C)
      for (int L = 0; L <= 3; ++L)
        for (int draw = 0; draw < 5; ++draw) {
          std::uniform_int_distribution<int> lab(0, C - 2);
          std::vector<int> labels(static_cast<std::size_t>(L));
          for (auto& v : labels) v = lab(rng);
          if (min_alignment_length(labels) > static_cast<std::size_t>(T)) continue;
          const LogitMatrix l = random_logits(T, C, rng);
          worst = std::max(worst, std::abs(ctc_loss(l, {labels}).loss - ctc_loss_bruteforce(l, {labels})));
        }
  CHECK(worst < 1e-10);
}

TEST_CASE("probability bounds and degenerate certainty") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const LogitMatrix l = random_logits(5, 4, rng);
    const double p = std::exp(-ctc_loss(l, {{0, 1}}).loss);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
  }
  // With 2 classes and an empty target, only the all-blank path survives; a
  // dominant blank drives the probability to 1.
  LogitMatrix sure = LogitMatrix::Zero(3, 2);
  sure.col(1).setConstant(200.0);
  CHECK(ctc_loss(sure, {{}}).loss == doctest::Approx(0.0));
}

TEST_CASE("softmax shift invariance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    LogitMatrix l = random_logits(7, 5, rng);
    const double base = ctc_loss(l, {{0, 2, 2}}).loss;
    for (Eigen::Index t = 0; t < l.rows(); ++t) l.row(t).array() += shift(rng);
    CHECK(std::abs(ctc_loss(l, {{0, 2, 2}}).loss - base) < 1e-9);
  }
}

TEST_CASE("relabeling non-blank classes is covariant") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int C = 5;
    const LogitMatrix l = random_logits(6, C, rng);
    std::vector<int> perm(C - 1);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LogitMatrix permuted = l;
    for (int k = 0; k < C - 1; ++k) permuted.col(perm[k]) = l.col(k);
    const std::vector<int> labels{0, 1, 3};
    std::vector<int> mapped;
    for (int v : labels) mapped.push_back(perm[v]);
    CHECK(std::abs(ctc_loss(l, {labels}).loss - ctc_loss(permuted, {mapped}).loss) < 1e-10);
  }
}

TEST_CASE("gradient rows sum to zero") {
  std::mt19937_64 rng(7);
  const LogitMatrix l = random_logits(8, 6, rng);
  const auto r = ctc_loss(l, {{1, 1, 3}});
  for (Eigen::Index t = 0; t < l.rows(); ++t) CHECK(std::abs(r.grad_logits.row(t).sum()) < 1e-12);
}

TEST_CASE("gradient check") {
  const auto report = ctc_grad_check(123, 20, 1e-5);
  CHECK(report.instances == 20);
  CHECK(report.all_finite);
  CHECK(report.max_rel_error < 1e-4);
  const auto again = ctc_grad_check(123, 20, 1e-5);
  CHECK(again.max_rel_error == report.max_rel_error);
}

TEST_CASE("zero-temperature logits keep finite gradients") {
  LogitMatrix l = LogitMatrix::Zero(6, 4);
  for (Eigen::Index t = 0; t < 6; ++t) l(t, t % 4) = 50.0;
  const auto r = ctc_loss(l, {{0, 1, 2}});
  CHECK(std::isfinite(r.loss));
  CHECK(r.grad_logits.allFinite());
  l.setZero();
  l.col(3).setConstant(50.0);
  const auto far = ctc_loss(l, {{0, 1}});
  CHECK(std::isfinite(far.loss));
  CHECK(far.grad_logits.allFinite());
}

TEST_CASE("labels from text") {
  CHECK(TargetLabels::from_text("ab z").labels == std::vector<int>{0, 1, 26, 25});
  CHECK(code_of([] { TargetLabels::from_text("A"); }) == ErrorCode::kInvalidInput);
}
