#include "faag/eval.hpp"

#include <algorithm>
#include <numeric>

#include "faag/error.hpp"

namespace faag {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diagonal = above;
    }
  }
  return row[b.size()];
}

namespace {

CerReport make_report(std::size_t distance, std::size_t target_len) {
  CerReport r;
  r.edit_distance = distance;
  r.target_len = target_len;
  r.cer = static_cast<double>(distance) / static_cast<double>(target_len);
  r.success_rate = std::max(0.0, 1.0 - r.cer);
  return r;
}

}  // namespace

CerReport cer(std::string_view target, std::string_view hypothesis) {
  if (target.empty()) throw Error(ErrorCode::kEmptyTarget, "CER needs a non-empty target");
  return make_report(edit_distance(target, hypothesis), target.size());
}

CerReport phrase_success(std::string_view target_phrase, std::string_view full_transcript) {
  if (target_phrase.empty()) throw Error(ErrorCode::kEmptyTarget, "phrase must not be empty");
  // Approximate substring matching: the transcript window may start and end
  // anywhere, so the first row is all zeros and the answer is the row minimum.
  const std::string_view& t = target_phrase;
  const std::string_view& y = full_transcript;
  std::vector<std::size_t> row(y.size() + 1, 0);
  for (std::size_t i = 1; i <= t.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + (t[i - 1] == y[j - 1] ? 0 : 1)});
      diagonal = above;
    }
  }
  return make_report(*std::min_element(row.begin(), row.end()), t.size());
}

DefenseReport eval_defense(const Waveform& benign, const Waveform& suspicious, const AcousticModel& model,
                           std::string_view target_phrase, const std::vector<std::string>& ground_truth_texts,
                           const FrameParams& p) {
  const Waveform combined = concat(benign, suspicious);
  DefenseReport report;
  report.transcript = transcribe(model, combined, p);
  report.attack_success_rate = phrase_success(target_phrase, report.transcript).success_rate;
  report.phrase_in_transcript = report.attack_success_rate >= kPhrasePresentThreshold;

  std::string truth;
  for (const auto& text : ground_truth_texts) {
    if (!truth.empty()) truth.push_back(' ');
    truth += text;
  }
  report.transcription_accuracy = truth.empty() ? 0.0 : cer(truth, report.transcript).success_rate;
  return report;
}

double BenchReport::mean_speedup() const {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rows) total += r.speedup;
  return total / static_cast<double>(rows.size());
}

double BenchReport::mean_window_op_ratio() const {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rows)
    total += static_cast<double>(r.faag_window_ops) / static_cast<double>(std::max<std::uint64_t>(1, r.baseline_window_ops));
  return total / static_cast<double>(rows.size());
}

BenchReport bench_speedup(const std::vector<Waveform>& corpus, const std::vector<TargetPhrase>& phrases,
                          const AcousticModel& model, const AttackConfig& cfg, const FrameParams& p,
                          int lambda) {
  if (corpus.empty() || phrases.empty())
    throw Error(ErrorCode::kInvalidInput, "benchmark needs at least one audio and one phrase");
  BenchReport report;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& phrase : phrases) {
      const ClipPlan plan = select_clip(corpus[i], phrase, model, p, lambda, Position::kBegin);
      const AttackResult faag = run_attack(corpus[i], phrase, model, plan, cfg, p);
      const AttackResult base = run_baseline(corpus[i], phrase, model, cfg, p);
      BenchRow row;
      row.audio_index = i;
      row.phrase = phrase.text();
      row.ratio_frames = plan.ratio_frames;
      row.faag_seconds = faag.wall_time_seconds;
      row.baseline_seconds = base.wall_time_seconds;
      row.speedup = 1.0 - faag.wall_time_seconds / base.wall_time_seconds;
      row.faag_window_ops = faag.window_ops;
      row.baseline_window_ops = base.window_ops;
      row.faag_success = faag.success_rate;
      row.baseline_success = base.success_rate;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace faag
