#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "faag/audio.hpp"
#include "faag/features.hpp"
#include "faag/model.hpp"

namespace faag {

enum class Position { kBegin, kMiddle, kEnd };
enum class Suffix { kTwoSpaces, kAndWord, kSingleSpace };

std::string_view to_string(Position p);
std::string_view to_string(Suffix s);
Position parse_position(std::string_view name);  // "begin" | "middle" | "end"
Suffix parse_suffix(std::string_view name);      // "spaces" | "and" | "space"

// The attacker's phrase plus the separator that keeps the rest of the audio
// from bleeding into it.
class TargetPhrase {
 public:
  // Throws InvalidInput unless text is non-empty lowercase a-z and spaces.
  explicit TargetPhrase(std::string text, Suffix suffix = Suffix::kTwoSpaces);

  const std::string& text() const { return text_; }
  Suffix suffix() const { return suffix_; }

  // Begin: text + separator. End: two spaces + text. Middle: two spaces +
  // text + separator.
  std::string effective_text(Position position) const;

 private:
  std::string text_;
  Suffix suffix_;
};

// The attacked span of the audio. clip_begin/clip_end are the two cut
// points: [0, index) for Begin, [index', index) for Middle, [index, |x|) for End.
struct ClipPlan {
  Position position = Position::kBegin;
  std::size_t clip_begin = 0;
  std::size_t clip_end = 0;
  int lambda = 0;
  std::size_t clip_len_samples = 0;
  double ratio_frames = 0.0;        // clip_len_samples / |x|
  std::size_t allocated_windows = 0;  // ceil(|c| / |y| * (|t| + lambda))
  std::size_t logit_count = 0;        // |c|
  std::size_t transcript_len = 0;     // |y|
  std::size_t target_len = 0;         // |t| including separators
};

// What clip selection needs to know about the audio and its transcription.
struct ClipGeometry {
  std::size_t audio_len = 0;
  std::size_t logit_count = 0;
  std::size_t transcript_len = 0;
  int step = 320;
};

// Pure clip arithmetic: clip_len = ceil(|c| (|t| + lambda) / |y|) * s.
// Throws PhraseTooLong when |t| + lambda > |y|, AudioTooShort when the clip
// does not fit, InvalidInput on lambda < 0 or an empty transcription.
ClipPlan plan_clip(const ClipGeometry& g, std::size_t target_len, int lambda, Position position);

ClipGeometry measure_clip_geometry(const Waveform& x, const AcousticModel& model, const FrameParams& p);

// Transcribes x with the model and plans the clip for the phrase's effective
// text at the given position.
ClipPlan select_clip(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                     const FrameParams& p, int lambda, Position position);

struct AttackConfig {
  int iterations = 1000;
  // Adam step size in int16 amplitude units; the normalized-domain step is
  // learning_rate / 32768.
  double learning_rate = 10.0;
  double initial_con = 40.0;  // dB budget on dB(delta) - dB(clip)
  double con_decay = 0.8;
  int check_every = 100;
  // One entry scales the sequence-level CTC loss; one entry per clip window
  // scales that window's logit gradient instead.
  std::vector<double> loss_weights = {1.0};
  double l2_weight = 1e-3;
  std::uint64_t seed = 0;  // recorded for replay; the optimization draws no random numbers
  double clip_bound = 1.0;

  void validate() const;
};

struct CheckpointRecord {
  int iteration = 0;
  double loss = 0.0;
  double con = 0.0;
  std::string decoded;
  double clip_db = 0.0;  // dB(delta) - dB(clip); -inf while delta is zero
  bool accepted = false;
};

struct AttackResult {
  explicit AttackResult(Waveform adv) : adversarial(std::move(adv)) {}

  Waveform adversarial;
  std::string transcript;
  std::string phrase;
  std::string target_text;
  Position position = Position::kBegin;
  int lambda = 0;
  bool baseline = false;
  std::size_t clip_begin = 0;
  std::size_t clip_end = 0;
  double success_rate = 0.0;
  double distortion_db = 0.0;
  double clip_db = 0.0;
  double ratio_frames = 0.0;
  int iterations_run = 0;
  int best_iteration = -1;  // -1 when no checkpoint decoded the target
  double wall_time_seconds = 0.0;
  std::uint64_t window_ops = 0;  // analysis windows pushed through forward+backward
  std::vector<CheckpointRecord> checkpoints;
};

// A checkpoint counts as successful when the clip decodes to the target and
// the perturbation stays within the current budget.
bool checkpoint_accepted(std::string_view decoded, std::string_view target, double clip_db, double con);

// Largest |delta| allowed by a dB budget relative to a reference peak.
double perturbation_bound(double reference_peak, double con_db);

// Optimizes a perturbation on the planned clip only, then splices the clip back
// into the untouched audio. Throws Unalignable when the clip has too few
// windows for the target, NonFiniteLoss if the loss blows up.
AttackResult run_attack(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                        const ClipPlan& plan, const AttackConfig& cfg, const FrameParams& p = {});

// Same optimization over the whole waveform with the bare phrase as target.
AttackResult run_baseline(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                          const AttackConfig& cfg, const FrameParams& p = {});

struct SweepResult {
  std::vector<AttackResult> runs;  // ordered as the lambdas were given
  std::size_t best_index = 0;
};

// Highest success rate, then lowest distortion, then lowest clip dB.
std::size_t best_run(const std::vector<AttackResult>& runs);

SweepResult sweep_lambda(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                         const std::vector<int>& lambdas, const AttackConfig& cfg,
                         const FrameParams& p = {}, Position position = Position::kBegin);

}  // namespace faag
