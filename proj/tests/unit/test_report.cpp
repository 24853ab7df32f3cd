#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "faag/report.hpp"

using namespace faag;
namespace fs = std::filesystem;

TEST_CASE("attack rows carry the documented fields") {
  AttackResult r(Waveform({0.1, 0.2, 0.3}));
  r.phrase = "go";
  r.target_text = "go  ";
  r.clip_db = -std::numeric_limits<double>::infinity();
  r.checkpoints.push_back({100, 1.5, 40.0, "go  ", -30.0, true});
  const auto j = to_json(r);
  for (const char* key : {"kind", "phrase", "target_text", "position", "lambda", "clip_begin", "clip_end",
                          "transcript", "success_rate", "distortion_db", "clip_db", "ratio_frames",
                          "iterations_run", "best_iteration", "wall_time_seconds", "window_ops", "samples",
                          "per_checkpoint_log"})
    CHECK(j.contains(key));
  CHECK(j["kind"] == "faag");
  CHECK(j["clip_db"].is_null());
  CHECK(j["per_checkpoint_log"].size() == 1);
  CHECK(j["per_checkpoint_log"][0]["decoded"] == "go  ");
  CHECK_FALSE(to_json(r, false).contains("per_checkpoint_log"));
}

TEST_CASE("jsonl appends one object per line") {
  const auto path = fs::temp_directory_path() / "faag_test_report.jsonl";
  fs::remove(path);
  append_jsonl(path, to_json(DefenseReport{"go", false, 0.5, 0.9}));
  append_jsonl(path, to_json(EpochRecord{1, 2.0, 0.5}));
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.is_object());
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("config snapshots") {
  const auto a = to_json(AttackConfig{});
  CHECK(a["learning_rate"] == 10.0);
  CHECK(a["iterations"] == 1000);
  const auto p = to_json(FrameParams{});
  CHECK(p["window_size"] == 512);
  const auto plan = to_json(plan_clip({100000, 200, 40, 320}, 17, 0, Position::kBegin));
  CHECK(plan["clip_len_samples"] == 27200);
}
