#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "faag/attack.hpp"
#include "faag/audio.hpp"
#include "faag/features.hpp"
#include "faag/model.hpp"

namespace faag {

struct CerReport {
  std::size_t edit_distance = 0;
  std::size_t target_len = 0;
  double cer = 0.0;           // edit_distance / target_len
  double success_rate = 0.0;  // max(0, 1 - cer)
};

// Unit-cost Levenshtein distance over characters.
std::size_t edit_distance(std::string_view a, std::string_view b);

// Throws EmptyTarget when target is empty.
CerReport cer(std::string_view target, std::string_view hypothesis);

// Best CER of target against any contiguous window of the transcript, so an
// embedded exact occurrence scores 1.0. Throws EmptyTarget.
CerReport phrase_success(std::string_view target_phrase, std::string_view full_transcript);

struct DefenseReport {
  std::string transcript;  // decode of benign followed by suspicious
  bool phrase_in_transcript = false;
  double attack_success_rate = 0.0;
  double transcription_accuracy = 0.0;
};

// A phrase counts as present from this phrase_success score upwards.
inline constexpr double kPhrasePresentThreshold = 0.99;

// Prepends the benign audio to the suspicious one and checks whether the
// phrase survives. Accuracy compares against the ground-truth texts joined
// by single spaces. Throws RateMismatch.
DefenseReport eval_defense(const Waveform& benign, const Waveform& suspicious, const AcousticModel& model,
                           std::string_view target_phrase, const std::vector<std::string>& ground_truth_texts,
                           const FrameParams& p = {});

struct BenchRow {
  std::size_t audio_index = 0;
  std::string phrase;
  double ratio_frames = 0.0;
  double faag_seconds = 0.0;
  double baseline_seconds = 0.0;
  double speedup = 0.0;  // 1 - faag / baseline
  std::uint64_t faag_window_ops = 0;
  std::uint64_t baseline_window_ops = 0;
  double faag_success = 0.0;
  double baseline_success = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  double mean_speedup() const;
  double mean_window_op_ratio() const;  // mean faag/baseline window-op ratio
};

// Runs FAAG (begin position, given lambda) and the whole-audio baseline with
// the same config on every (audio, phrase) pair, one after the other.
BenchReport bench_speedup(const std::vector<Waveform>& corpus, const std::vector<TargetPhrase>& phrases,
                          const AcousticModel& model, const AttackConfig& cfg, const FrameParams& p = {},
                          int lambda = 0);

}  // namespace faag
