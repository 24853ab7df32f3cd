#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "faag/attack.hpp"
#include "faag/eval.hpp"
#include "faag/train.hpp"

namespace faag {

inline constexpr const char* kToolVersion = "0.3.0";

// JSON Lines rows. Non-finite doubles (a zero perturbation has clip_db = -inf)
// are written as null.
nlohmann::json to_json(const AttackResult& r, bool with_checkpoints = true);
nlohmann::json to_json(const ClipPlan& plan);
nlohmann::json to_json(const DefenseReport& r);
nlohmann::json to_json(const BenchRow& r);
nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const AttackConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const FrameParams& p);

// Appends one compact JSON object per line.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& row);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace faag
