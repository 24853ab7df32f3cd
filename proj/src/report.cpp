#include "faag/report.hpp"

#include <cmath>
#include <fstream>

#include "faag/error.hpp"

namespace faag {

namespace {

void ensure_parent(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
}

nlohmann::json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json to_json(const AttackResult& r, bool with_checkpoints) {
  nlohmann::json j = {
      {"kind", r.baseline ? "baseline" : "faag"},
      {"phrase", r.phrase},
      {"target_text", r.target_text},
      {"position", std::string(to_string(r.position))},
      {"lambda", r.lambda},
      {"clip_begin", r.clip_begin},
      {"clip_end", r.clip_end},
      {"transcript", r.transcript},
      {"success_rate", r.success_rate},
      {"distortion_db", number(r.distortion_db)},
      {"clip_db", number(r.clip_db)},
      {"ratio_frames", r.ratio_frames},
      {"iterations_run", r.iterations_run},
      {"best_iteration", r.best_iteration},
      {"wall_time_seconds", r.wall_time_seconds},
      {"window_ops", r.window_ops},
      {"samples", r.adversarial.size()},
  };
  if (with_checkpoints) {
    auto& log = j["per_checkpoint_log"] = nlohmann::json::array();
    for (const auto& c : r.checkpoints)
      log.push_back({{"iteration", c.iteration},
                     {"loss", number(c.loss)},
                     {"con", c.con},
                     {"decoded", c.decoded},
                     {"clip_db", number(c.clip_db)},
                     {"accepted", c.accepted}});
  }
  return j;
}

nlohmann::json to_json(const ClipPlan& plan) {
  return {{"position", std::string(to_string(plan.position))},
          {"clip_begin", plan.clip_begin},
          {"clip_end", plan.clip_end},
          {"lambda", plan.lambda},
          {"clip_len_samples", plan.clip_len_samples},
          {"ratio_frames", plan.ratio_frames},
          {"allocated_windows", plan.allocated_windows},
          {"logit_count", plan.logit_count},
          {"transcript_len", plan.transcript_len},
          {"target_len", plan.target_len}};
}

nlohmann::json to_json(const DefenseReport& r) {
  return {{"transcript", r.transcript},
          {"phrase_in_transcript", r.phrase_in_transcript},
          {"attack_success_rate", r.attack_success_rate},
          {"transcription_accuracy", r.transcription_accuracy}};
}

nlohmann::json to_json(const BenchRow& r) {
  return {{"audio_index", r.audio_index},
          {"phrase", r.phrase},
          {"ratio_frames", r.ratio_frames},
          {"faag_seconds", r.faag_seconds},
          {"baseline_seconds", r.baseline_seconds},
          {"speedup", r.speedup},
          {"faag_window_ops", r.faag_window_ops},
          {"baseline_window_ops", r.baseline_window_ops},
          {"faag_success", r.faag_success},
          {"baseline_success", r.baseline_success}};
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"cer", r.cer}};
}

nlohmann::json to_json(const AttackConfig& cfg) {
  return {{"iterations", cfg.iterations},     {"learning_rate", cfg.learning_rate},
          {"initial_con", cfg.initial_con},   {"con_decay", cfg.con_decay},
          {"check_every", cfg.check_every},   {"loss_weights", cfg.loss_weights},
          {"l2_weight", cfg.l2_weight},       {"seed", cfg.seed},
          {"clip_bound", cfg.clip_bound}};
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},         {"learning_rate", cfg.learning_rate},
          {"adam_beta1", cfg.adam_beta1}, {"adam_beta2", cfg.adam_beta2},
          {"adam_eps", cfg.adam_eps},     {"seed", cfg.seed}};
}

nlohmann::json to_json(const FrameParams& p) {
  return {{"window_size", p.window_size}, {"step", p.step}, {"n_mels", p.n_mels}, {"n_coeffs", p.n_coeffs}};
}

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& row) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
  out << row.dump() << '\n';
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace faag
