#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "faag/model.hpp"

namespace faag {

// Label indices of a target transcription. The blank is always the last
// logit column, so every label must be below logits.cols() - 1.
struct TargetLabels {
  std::vector<int> labels;

  static TargetLabels from_text(std::string_view text);
};

struct CtcLoss {
  double loss = 0.0;       // -log p(target | logits)
  LogitMatrix grad_logits; // d loss / d logits
};

// Shortest T that can emit the labels: one window per label plus a blank
// between each pair of equal neighbours.
std::size_t min_alignment_length(std::span<const int> labels);

// Log-domain forward-backward over the blank-interleaved label sequence.
// Throws EmptyLogits when there are no rows or fewer than two classes,
// InvalidInput on out-of-range labels, Unalignable when T is too short.
CtcLoss ctc_loss(const LogitMatrix& logits, const TargetLabels& target);

// Sums the probability of every path that collapses to the target.
// Throws TooLarge beyond T = 8 or 6 classes.
double ctc_loss_bruteforce(const LogitMatrix& logits, const TargetLabels& target);

struct GradCheckReport {
  int instances = 0;
  double max_rel_error = 0.0;
  bool all_finite = true;
};

// Central differences of ctc_loss on random small instances (T <= 8).
// Relative error per instance is ||analytic - numeric|| / max(||analytic||, ||numeric||).
GradCheckReport ctc_grad_check(std::uint64_t seed, int instances = 20, double step = 1e-5);

}  // namespace faag
