#include "faag/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include "faag/adam.hpp"
#include "faag/ctc.hpp"
#include "faag/error.hpp"
#include "faag/eval.hpp"

namespace faag {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t ceil_div(std::size_t num, std::size_t den) { return (num + den - 1) / den; }

std::string separator(Suffix s) {
  switch (s) {
    case Suffix::kTwoSpaces: return "  ";
    case Suffix::kAndWord: return " and";
    case Suffix::kSingleSpace: return " ";
  }
  return "  ";
}

// dB(delta) - dB(reference) on the int16 scale; -inf for a zero perturbation.
double relative_db(std::span<const double> delta, double reference_peak) {
  const double peak = peak_magnitude(delta);
  if (peak == 0.0) return kNegInf;
  return 20.0 * std::log10(peak / reference_peak);
}

struct Candidate {
  std::vector<double> delta;
  int iteration = 0;
  double distortion = 0.0;
  double clip_db = 0.0;
};

std::vector<double> splice(const Waveform& x, std::size_t begin, std::span<const double> clip) {
  std::vector<double> out(x.samples().begin(), x.samples().end());
  std::copy(clip.begin(), clip.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  return out;
}

// Peak of x with [begin, begin + clip.size()) replaced by clip.
double spliced_peak(const Waveform& x, std::size_t begin, std::span<const double> clip) {
  const auto s = x.samples();
  double peak = peak_magnitude(clip);
  peak = std::max(peak, peak_magnitude(s.subspan(0, begin)));
  peak = std::max(peak, peak_magnitude(s.subspan(begin + clip.size())));
  return peak;
}

AttackResult optimize_clip(const Waveform& x, const ClipPlan& plan, const std::string& target_text,
                           const TargetPhrase& phrase, const AcousticModel& model,
                           const AttackConfig& cfg, const FrameParams& p, bool baseline) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  if (plan.clip_begin >= plan.clip_end || plan.clip_end > x.size() ||
      plan.clip_end - plan.clip_begin != plan.clip_len_samples)
    throw Error(ErrorCode::kInvalidInput, "clip plan does not fit the audio");

  const MfccFrontEnd front_end(p, x.sample_rate());
  const std::size_t clip_len = plan.clip_len_samples;
  const auto original = x.samples().subspan(plan.clip_begin, clip_len);
  if (clip_len < static_cast<std::size_t>(p.window_size))
    throw Error(ErrorCode::kUnalignable, "clip of " + std::to_string(clip_len) +
                                             " samples is shorter than one analysis window");
  const std::size_t windows = frame_count(clip_len, p);
  const TargetLabels labels = TargetLabels::from_text(target_text);
  if (min_alignment_length(labels.labels) > windows)
    throw Error(ErrorCode::kUnalignable, "\"" + target_text + "\" needs " +
                                             std::to_string(min_alignment_length(labels.labels)) +
                                             " windows, clip has " + std::to_string(windows));
  if (cfg.loss_weights.size() != 1 && cfg.loss_weights.size() != windows)
    throw Error(ErrorCode::kInvalidInput, "loss_weights needs 1 or " + std::to_string(windows) + " entries");

  double reference_peak = peak_magnitude(original);
  if (reference_peak == 0.0) reference_peak = peak_magnitude(x.samples());
  if (reference_peak == 0.0) throw Error(ErrorCode::kSilentAudio, "cannot bound noise on silent audio");
  const double original_db = loudness_db(x).db;

  std::vector<double> delta(clip_len, 0.0);
  std::vector<double> adversarial(original.begin(), original.end());
  double con = cfg.initial_con;
  double bound = perturbation_bound(reference_peak, con);
  auto project = [&] {
    for (std::size_t i = 0; i < clip_len; ++i) {
      const double d = std::clamp(delta[i], -bound, bound);
      adversarial[i] = std::clamp(original[i] + d, -cfg.clip_bound, cfg.clip_bound);
      delta[i] = adversarial[i] - original[i];
    }
  };
  auto decode_clip = [&] { return transcribe(model, front_end, adversarial); };

  AttackResult result(x);
  result.phrase = phrase.text();
  result.target_text = target_text;
  result.position = plan.position;
  result.lambda = plan.lambda;
  result.baseline = baseline;
  result.clip_begin = plan.clip_begin;
  result.clip_end = plan.clip_end;
  result.ratio_frames = plan.ratio_frames;

  std::optional<Candidate> best;
  auto consider = [&](int iteration, double clip_db) {
    const double distortion = 20.0 * std::log10(spliced_peak(x, plan.clip_begin, adversarial) * kLoudnessScale) - original_db;
    if (!best || distortion < best->distortion ||
        (distortion == best->distortion && clip_db < best->clip_db))
      best = Candidate{delta, iteration, distortion, clip_db};
  };

  // The clip may already read as the target; nothing can beat zero noise.
  if (decode_clip() == target_text) {
    consider(0, kNegInf);
  } else {
    Adam adam(clip_len, AdamParams{cfg.learning_rate / kPcmScale, 0.9, 0.999, 1e-8});
    const double scalar_weight = cfg.loss_weights.size() == 1 ? cfg.loss_weights.front() : 1.0;
    MfccFrontEnd::Cache cache;
    std::vector<double> grad(clip_len);
    for (int it = 1; it <= cfg.iterations; ++it) {
      const FeatureMatrix features = front_end.forward(adversarial, &cache);
      const ForwardResult fwd = forward(model, features);
      CtcLoss ctc = ctc_loss(fwd.logits, labels);
      if (!std::isfinite(ctc.loss))
        throw Error(ErrorCode::kNonFiniteLoss, "CTC loss is not finite at iteration " + std::to_string(it));
      if (cfg.loss_weights.size() == 1) {
        ctc.grad_logits *= scalar_weight;
      } else {
        for (std::size_t w = 0; w < windows; ++w)
          ctc.grad_logits.row(static_cast<Eigen::Index>(w)) *= cfg.loss_weights[w];
      }
      double l2 = 0.0;
      for (double d : delta) l2 += d * d;
      const double loss = scalar_weight * ctc.loss + cfg.l2_weight * l2;

      const BackwardResult back = backward(model, features, fwd, ctc.grad_logits, GradientTargets::kInputsOnly);
      const std::vector<double> audio_grad = front_end.backward(clip_len, cache, back.input_grad);
      for (std::size_t i = 0; i < clip_len; ++i) grad[i] = audio_grad[i] + 2.0 * cfg.l2_weight * delta[i];
      result.window_ops += windows;

      adam.update(delta, grad, it);
      project();
      result.iterations_run = it;

      const bool scheduled = it % cfg.check_every == 0;
      if (!scheduled && it != cfg.iterations) continue;
      CheckpointRecord record{it, loss, con, decode_clip(), relative_db(delta, reference_peak), false};
      record.accepted = checkpoint_accepted(record.decoded, target_text, record.clip_db, con);
      if (record.accepted) {
        consider(it, record.clip_db);
        if (scheduled) {
          con *= cfg.con_decay;
          bound = perturbation_bound(reference_peak, con);
          project();
        }
      }
      result.checkpoints.push_back(std::move(record));
    }
  }

  if (best) {
    delta = best->delta;
    for (std::size_t i = 0; i < clip_len; ++i) adversarial[i] = original[i] + delta[i];
    result.best_iteration = best->iteration;
  }
  result.adversarial = Waveform::clamped(splice(x, plan.clip_begin, adversarial), x.sample_rate());
  result.clip_db = relative_db(delta, reference_peak);
  result.transcript = transcribe(model, front_end, result.adversarial.samples());
  result.success_rate = phrase_success(phrase.text(), result.transcript).success_rate;
  result.distortion_db = distortion_db(x, result.adversarial).db;
  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace

std::string_view to_string(Position p) {
  switch (p) {
    case Position::kBegin: return "begin";
    case Position::kMiddle: return "middle";
    case Position::kEnd: return "end";
  }
  return "begin";
}

std::string_view to_string(Suffix s) {
  switch (s) {
    case Suffix::kTwoSpaces: return "spaces";
    case Suffix::kAndWord: return "and";
    case Suffix::kSingleSpace: return "space";
  }
  return "spaces";
}

Position parse_position(std::string_view name) {
  if (name == "begin") return Position::kBegin;
  if (name == "middle") return Position::kMiddle;
  if (name == "end") return Position::kEnd;
  throw Error(ErrorCode::kInvalidInput, "unknown position '" + std::string(name) + "'");
}

Suffix parse_suffix(std::string_view name) {
  if (name == "spaces") return Suffix::kTwoSpaces;
  if (name == "and") return Suffix::kAndWord;
  if (name == "space") return Suffix::kSingleSpace;
  throw Error(ErrorCode::kInvalidInput, "unknown suffix '" + std::string(name) + "'");
}

TargetPhrase::TargetPhrase(std::string text, Suffix suffix) : text_(std::move(text)), suffix_(suffix) {
  if (!is_valid_transcript(text_))
    throw Error(ErrorCode::kInvalidInput, "phrase must be non-empty lowercase a-z and spaces");
}

std::string TargetPhrase::effective_text(Position position) const {
  switch (position) {
    case Position::kBegin: return text_ + separator(suffix_);
    case Position::kEnd: return "  " + text_;
    case Position::kMiddle: return "  " + text_ + separator(suffix_);
  }
  return text_;
}

ClipPlan plan_clip(const ClipGeometry& g, std::size_t target_len, int lambda, Position position) {
  if (lambda < 0) throw Error(ErrorCode::kInvalidInput, "lambda must be non-negative");
  if (g.transcript_len == 0) throw Error(ErrorCode::kInvalidInput, "the model transcribes the audio as empty text");
  if (g.step <= 0) throw Error(ErrorCode::kInvalidInput, "step must be positive");
  const std::size_t allocated = target_len + static_cast<std::size_t>(lambda);
  if (allocated > g.transcript_len)
    throw Error(ErrorCode::kPhraseTooLong, "|t| + lambda = " + std::to_string(target_len) + " + " +
                                               std::to_string(lambda) + " exceeds |y| = " +
                                               std::to_string(g.transcript_len));

  ClipPlan plan;
  plan.position = position;
  plan.lambda = lambda;
  plan.logit_count = g.logit_count;
  plan.transcript_len = g.transcript_len;
  plan.target_len = target_len;
  plan.allocated_windows = ceil_div(g.logit_count * allocated, g.transcript_len);
  const auto step = static_cast<std::size_t>(g.step);
  plan.clip_len_samples = plan.allocated_windows * step;
  if (plan.clip_len_samples == 0 || plan.clip_len_samples > g.audio_len)
    throw Error(ErrorCode::kAudioTooShort, "clip of " + std::to_string(plan.clip_len_samples) +
                                               " samples does not fit " + std::to_string(g.audio_len) + " samples");

  switch (position) {
    case Position::kBegin: plan.clip_begin = 0; break;
    case Position::kMiddle:
      // Leave roughly three characters' worth of windows untouched in front.
      plan.clip_begin = ceil_div(3 * g.logit_count, g.transcript_len) * step;
      break;
    case Position::kEnd: plan.clip_begin = g.audio_len - plan.clip_len_samples; break;
  }
  plan.clip_end = plan.clip_begin + plan.clip_len_samples;
  if (plan.clip_end > g.audio_len)
    throw Error(ErrorCode::kAudioTooShort, "clip ends at sample " + std::to_string(plan.clip_end) +
                                               " past the end of " + std::to_string(g.audio_len) + " samples");
  plan.ratio_frames = static_cast<double>(plan.clip_len_samples) / static_cast<double>(g.audio_len);
  return plan;
}

ClipGeometry measure_clip_geometry(const Waveform& x, const AcousticModel& model, const FrameParams& p) {
  const MfccFrontEnd front_end(p, x.sample_rate());
  const FeatureMatrix features = front_end.forward(x.samples());
  const std::string y = greedy_decode(forward(model, features).logits);
  return {x.size(), static_cast<std::size_t>(features.rows()), y.size(), p.step};
}

ClipPlan select_clip(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                     const FrameParams& p, int lambda, Position position) {
  return plan_clip(measure_clip_geometry(x, model, p), t.effective_text(position).size(), lambda, position);
}

void AttackConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::kInvalidInput, "iterations must be at least 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidInput, "learning rate must be positive");
  if (!(con_decay > 0.0 && con_decay < 1.0)) throw Error(ErrorCode::kInvalidInput, "con_decay must lie in (0, 1)");
  if (check_every < 1) throw Error(ErrorCode::kInvalidInput, "check_every must be at least 1");
  if (loss_weights.empty()) throw Error(ErrorCode::kInvalidInput, "loss_weights must not be empty");
  if (!(clip_bound > 0.0 && clip_bound <= 1.0)) throw Error(ErrorCode::kInvalidInput, "clip_bound must lie in (0, 1]");
  if (l2_weight < 0.0) throw Error(ErrorCode::kInvalidInput, "l2_weight must be non-negative");
}

bool checkpoint_accepted(std::string_view decoded, std::string_view target, double clip_db, double con) {
  return decoded == target && clip_db <= con;
}

double perturbation_bound(double reference_peak, double con_db) {
  return reference_peak * std::pow(10.0, con_db / 20.0);
}

AttackResult run_attack(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                        const ClipPlan& plan, const AttackConfig& cfg, const FrameParams& p) {
  return optimize_clip(x, plan, t.effective_text(plan.position), t, model, cfg, p, false);
}

AttackResult run_baseline(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                          const AttackConfig& cfg, const FrameParams& p) {
  ClipPlan plan;
  plan.position = Position::kBegin;
  plan.clip_begin = 0;
  plan.clip_end = x.size();
  plan.clip_len_samples = x.size();
  plan.ratio_frames = 1.0;
  plan.target_len = t.text().size();
  return optimize_clip(x, plan, t.text(), t, model, cfg, p, true);
}

std::size_t best_run(const std::vector<AttackResult>& runs) {
  if (runs.empty()) throw Error(ErrorCode::kInvalidInput, "no runs to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto& a = runs[i];
    const auto& b = runs[best];
    if (a.success_rate != b.success_rate) {
      if (a.success_rate > b.success_rate) best = i;
    } else if (a.distortion_db != b.distortion_db) {
      if (a.distortion_db < b.distortion_db) best = i;
    } else if (a.clip_db < b.clip_db) {
      best = i;
    }
  }
  return best;
}

SweepResult sweep_lambda(const Waveform& x, const TargetPhrase& t, const AcousticModel& model,
                         const std::vector<int>& lambdas, const AttackConfig& cfg, const FrameParams& p,
                         Position position) {
  if (lambdas.empty()) throw Error(ErrorCode::kInvalidInput, "no lambdas to sweep");
  const ClipGeometry geometry = measure_clip_geometry(x, model, p);
  const std::size_t target_len = t.effective_text(position).size();
  SweepResult sweep;
  for (int lambda : lambdas)
    sweep.runs.push_back(run_attack(x, t, model, plan_clip(geometry, target_len, lambda, position), cfg, p));
  sweep.best_index = best_run(sweep.runs);
  return sweep;
}

}  // namespace faag
