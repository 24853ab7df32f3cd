#include "faag/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "faag/error.hpp"

namespace faag {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

RowMatrix log_softmax(const LogitMatrix& logits) {
  RowMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double peak = logits.row(t).maxCoeff();
    const double lse = peak + std::log((logits.row(t).array() - peak).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

void check_inputs(const LogitMatrix& logits, const TargetLabels& target) {
  if (logits.rows() == 0 || logits.cols() < 2)
    throw Error(ErrorCode::kEmptyLogits, "CTC needs at least one window and two classes");
  const int blank = static_cast<int>(logits.cols()) - 1;
  for (int l : target.labels)
    if (l < 0 || l >= blank)
      throw Error(ErrorCode::kInvalidInput, "label " + std::to_string(l) + " is out of range for " +
                                                std::to_string(logits.cols()) + " classes");
  const std::size_t needed = min_alignment_length(target.labels);
  if (static_cast<std::size_t>(logits.rows()) < needed)
    throw Error(ErrorCode::kUnalignable, "target needs " + std::to_string(needed) +
                                             " windows, logits have " + std::to_string(logits.rows()));
}

}  // namespace

TargetLabels TargetLabels::from_text(std::string_view text) { return {Alphabet::encode(text)}; }

std::size_t min_alignment_length(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

CtcLoss ctc_loss(const LogitMatrix& logits, const TargetLabels& target) {
  check_inputs(logits, target);
  const Eigen::Index steps = logits.rows();
  const int blank = static_cast<int>(logits.cols()) - 1;

  std::vector<int> ext(2 * target.labels.size() + 1, blank);
  for (std::size_t i = 0; i < target.labels.size(); ++i) ext[2 * i + 1] = target.labels[i];
  const auto states = static_cast<Eigen::Index>(ext.size());
  auto skip_allowed = [&](Eigen::Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != blank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };

  const RowMatrix lp = log_softmax(logits);
  auto emit = [&](Eigen::Index t, Eigen::Index s) { return lp(t, ext[static_cast<std::size_t>(s)]); };

  RowMatrix alpha = RowMatrix::Constant(steps, states, kNegInf);
  alpha(0, 0) = emit(0, 0);
  if (states > 1) alpha(0, 1) = emit(0, 1);
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (skip_allowed(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + emit(t, s);
    }
  }

  // beta(t, s): log-probability of finishing from state s at t, excluding the
  // emission at t itself.
  RowMatrix beta = RowMatrix::Constant(steps, states, kNegInf);
  beta(steps - 1, states - 1) = 0.0;
  if (states > 1) beta(steps - 1, states - 2) = 0.0;
  for (Eigen::Index t = steps - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + emit(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1) + emit(t + 1, s + 1));
      if (s + 2 < states && skip_allowed(s + 2))
        acc = log_add(acc, beta(t + 1, s + 2) + emit(t + 1, s + 2));
      beta(t, s) = acc;
    }
  }

  double log_total = alpha(steps - 1, states - 1);
  if (states > 1) log_total = log_add(log_total, alpha(steps - 1, states - 2));
  if (!std::isfinite(log_total))
    throw Error(ErrorCode::kUnalignable, "no alignment has non-zero probability");

  CtcLoss out;
  out.loss = -log_total;
  out.grad_logits = lp.array().exp().matrix();
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      const double occupancy = alpha(t, s) + beta(t, s) - log_total;
      if (occupancy != kNegInf) out.grad_logits(t, ext[static_cast<std::size_t>(s)]) -= std::exp(occupancy);
    }
  }
  return out;
}

double ctc_loss_bruteforce(const LogitMatrix& logits, const TargetLabels& target) {
  if (logits.rows() > 8 || logits.cols() > 6)
    throw Error(ErrorCode::kTooLarge, "path enumeration is limited to T <= 8 and 6 classes");
  check_inputs(logits, target);
  const auto steps = static_cast<std::size_t>(logits.rows());
  const auto classes = static_cast<int>(logits.cols());
  const int blank = classes - 1;
  const RowMatrix probs = log_softmax(logits).array().exp().matrix();

  std::vector<int> path(steps, 0);
  std::vector<int> collapsed;
  double total = 0.0;
  while (true) {
    collapsed.clear();
    int previous = -1;
    for (int k : path) {
      if (k != previous && k != blank) collapsed.push_back(k);
      previous = k;
    }
    if (collapsed == target.labels) {
      double p = 1.0;
      for (std::size_t t = 0; t < steps; ++t) p *= probs(static_cast<Eigen::Index>(t), path[t]);
      total += p;
    }
    // Odometer increment over classes^T paths.
    std::size_t pos = 0;
    while (pos < steps && ++path[pos] == classes) path[pos++] = 0;
    if (pos == steps) break;
  }
  return -std::log(total);
}

GradCheckReport ctc_grad_check(std::uint64_t seed, int instances, double step) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };

  GradCheckReport report;
  while (report.instances < instances) {
    const int steps = 1 + pick(8);
    const int classes = 2 + pick(4);
    TargetLabels target;
    const int length = pick(4);
    for (int i = 0; i < length; ++i) target.labels.push_back(pick(classes - 1));
    if (min_alignment_length(target.labels) > static_cast<std::size_t>(steps)) continue;

    LogitMatrix logits(steps, classes);
    for (Eigen::Index t = 0; t < logits.rows(); ++t)
      for (Eigen::Index k = 0; k < logits.cols(); ++k) logits(t, k) = uniform(-3.0, 3.0);

    const CtcLoss analytic = ctc_loss(logits, target);
    LogitMatrix numeric(steps, classes);
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      for (Eigen::Index k = 0; k < logits.cols(); ++k) {
        LogitMatrix plus = logits, minus = logits;
        plus(t, k) += step;
        minus(t, k) -= step;
        numeric(t, k) = (ctc_loss(plus, target).loss - ctc_loss(minus, target).loss) / (2.0 * step);
      }
    }
    const double scale = std::max({analytic.grad_logits.norm(), numeric.norm(), 1e-12});
    report.max_rel_error = std::max(report.max_rel_error, (analytic.grad_logits - numeric).norm() / scale);
    report.all_finite = report.all_finite && analytic.grad_logits.allFinite() && std::isfinite(analytic.loss);
    ++report.instances;
  }
  return report;
}

}  // namespace faag
