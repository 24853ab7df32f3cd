#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "faag/audio.hpp"
#include "faag/error.hpp"
#include "faag/model.hpp"

namespace fs = std::filesystem;
using namespace faag;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(FAAG_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<nlohmann::json> jsonl(const fs::path& p) {
  std::vector<nlohmann::json> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

std::string first_manifest_line(const fs::path& corpus) {
  std::ifstream in(corpus / "manifest.tsv");
  std::string line;
  std::getline(in, line);
  return line;
}

// One trained model shared by the attack-facing cases.
const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "faag_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string q = "\"" + d.string() + "\"";
    REQUIRE(cli("synth --out " + q + "/corpus --n 20 --seed 7").code == 0);
    REQUIRE(cli("train --corpus " + q + "/corpus --out " + q + "/model.faag --seed 7").code == 0);
    REQUIRE(cli("synth --out " + q + "/held --n 2 --words 5 --seed 99").code == 0);
    return d;
  }();
  return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("help documents exit codes") {
  const Run r = cli("--help");
  CHECK(r.code == 0);
  CHECK(r.output.find("Exit codes") != std::string::npos);
  CHECK(r.output.find("ChecksumMismatch") != std::string::npos);
  CHECK(r.output.find(std::to_string(exit_code(ErrorCode::kPhraseTooLong))) != std::string::npos);
}

TEST_CASE("synth") {
  const fs::path dir = fs::temp_directory_path() / "faag_cli_synth";
  fs::remove_all(dir);
  const Run r = cli("synth --out " + q(dir / "a") + " --n 4 --seed 3");
  CHECK(r.code == 0);
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 4);
  std::ifstream manifest(dir / "a" / "manifest.tsv");
  int lines = 0;
  for (std::string l; std::getline(manifest, l);) ++lines;
  CHECK(lines == 4);
  CHECK(fs::exists(dir / "a" / "faag_synth.manifest.json"));

  CHECK(cli("synth --out " + q(dir / "b") + " --n 4 --seed 3").code == 0);
  for (const auto& e : fs::directory_iterator(dir / "a"))
    if (e.path().extension() == ".wav") CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));

  CHECK(cli("synth --out " + q(dir / "c") + " --n 0").code == 2);
}

TEST_CASE("seed comes from FAAG_SEED and config files, flags win") {
  const fs::path dir = fs::temp_directory_path() / "faag_cli_seed";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK(cli("synth --out " + q(dir / "env") + " --n 1", "FAAG_SEED=41").code == 0);
  auto m = nlohmann::json::parse(slurp(dir / "env" / "faag_synth.manifest.json"));
  CHECK(m["seeds"]["corpus"] == 41);

  std::ofstream(dir / "cfg.toml") << "[synth]\nseed = 5\nn = 2\n";
  CHECK(cli("--config " + q(dir / "cfg.toml") + " synth --out " + q(dir / "cfg")).code == 0);
  m = nlohmann::json::parse(slurp(dir / "cfg" / "faag_synth.manifest.json"));
  CHECK(m["seeds"]["corpus"] == 5);
  CHECK(fs::exists(dir / "cfg" / "utt_001.wav"));

  CHECK(cli("--config " + q(dir / "cfg.toml") + " synth --out " + q(dir / "flag") + " --seed 9").code == 0);
  m = nlohmann::json::parse(slurp(dir / "flag" / "faag_synth.manifest.json"));
  CHECK(m["seeds"]["corpus"] == 9);
  CHECK(m["tool_version"].is_string());
}

TEST_CASE("train") {
  const fs::path& d = workdir();
  CHECK(fs::exists(d / "model.faag"));
  CHECK(fs::exists(d / "model.faag.train.jsonl"));
  CHECK(jsonl(d / "model.faag.train.jsonl").size() == 30);
  const auto manifest = nlohmann::json::parse(slurp(d / "faag_train.manifest.json"));
  CHECK(manifest["model_crc32"] == model_file_crc(d / "model.faag"));
  CHECK(manifest["seeds"]["init"] == 7);

  const Run again = cli("train --corpus " + q(d / "corpus") + " --out " + q(d / "m2.faag") + " --epochs 2 --seed 7");
  CHECK(again.code == 0);
  CHECK(again.output.find("final CER") != std::string::npos);

  const Run missing = cli("train --corpus " + q(d / "nowhere") + " --out " + q(d / "x.faag"));
  CHECK(missing.code != 0);
  CHECK(missing.output.find((d / "nowhere" / "manifest.tsv").string()) != std::string::npos);

  CHECK(cli("train --corpus " + q(d / "corpus") + " --out " + q(d / "zero.faag") + " --epochs 0 --seed 11").code == 0);
  CHECK(load_model(d / "zero.faag") == init_model(13, 128, 11));
}

TEST_CASE("transcribe") {
  const fs::path& d = workdir();
  const std::string line = first_manifest_line(d / "corpus");
  const std::string file = line.substr(0, line.find('\t'));
  const std::string text = line.substr(line.find('\t') + 1);
  const Run r = cli("transcribe --model " + q(d / "model.faag") + " --wav " + q(d / "corpus" / file) +
                    " --manifest-dir " + q(d / "tx"));
  CHECK(r.code == 0);
  CHECK(r.output == text + "\n");
  CHECK(fs::exists(d / "tx" / "faag_transcribe.manifest.json"));

  std::string bytes = slurp(d / "model.faag");
  bytes[100] ^= 0x01;
  std::ofstream(d / "corrupt.faag", std::ios::binary) << bytes;
  const Run bad = cli("transcribe --model " + q(d / "corrupt.faag") + " --wav " + q(d / "corpus" / file) +
                      " --manifest-dir " + q(d / "tx"));
  CHECK(bad.code == exit_code(ErrorCode::kChecksumMismatch));
  CHECK(bad.output.find("ChecksumMismatch") != std::string::npos);

  write_wav(Waveform(std::vector<double>(100, 0.1)), d / "short.wav");
  const Run too_short = cli("transcribe --model " + q(d / "model.faag") + " --wav " + q(d / "short.wav") +
                            " --manifest-dir " + q(d / "tx"));
  CHECK(too_short.code == exit_code(ErrorCode::kTooShort));
}

TEST_CASE("attack") {
  const fs::path& d = workdir();
  const fs::path wav = d / "held" / "utt_000.wav";
  const Run r = cli("attack --model " + q(d / "model.faag") + " --wav " + q(wav) +
                    " --phrase \"go\" --iterations 50 --lr 100 --out " + q(d / "atk" / "adv.wav") + " --report " +
                    q(d / "atk" / "report.jsonl"));
  REQUIRE(r.code == 0);
  CHECK(read_wav(d / "atk" / "adv.wav").size() == read_wav(wav).size());
  const auto rows = jsonl(d / "atk" / "report.jsonl");
  REQUIRE(rows.size() == 1);
  for (const char* k : {"success_rate", "distortion_db", "ratio_frames", "wall_time_seconds", "per_checkpoint_log"})
    CHECK(rows[0].contains(k));
  CHECK(fs::exists(d / "atk" / "faag_attack.manifest.json"));

  const Run too_long = cli("attack --model " + q(d / "model.faag") + " --wav " + q(wav) +
                           " --phrase \"call red open door play blue stop green turn\" --lambda 3 --out " +
                           q(d / "atk" / "x.wav"));
  CHECK(too_long.code == exit_code(ErrorCode::kPhraseTooLong));
  CHECK(too_long.output.find(" + 3 exceeds |y| = ") != std::string::npos);
}

TEST_CASE("sweep") {
  const fs::path& d = workdir();
  const fs::path wav = d / "held" / "utt_001.wav";
  auto sweep = [&](const std::string& name, const std::string& extra) {
    const Run r = cli("sweep --model " + q(d / "model.faag") + " --wav " + q(wav) +
                      " --phrase \"go\" --lambdas 2,0,1 --iterations 20 --report " + q(d / "sw" / name) + " " + extra);
    REQUIRE(r.code == 0);
    return jsonl(d / "sw" / name);
  };
  const auto a = sweep("a.jsonl", "--jobs 2");
  const auto b = sweep("b.jsonl", "");
  REQUIRE(a.size() == 3);
  CHECK(a[0]["lambda"] == 2);
  CHECK(a[1]["lambda"] == 0);
  CHECK(a[2]["lambda"] == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].contains("ratio_frames"));
    auto x = a[i], y = b[i];
    x.erase("wall_time_seconds");
    y.erase("wall_time_seconds");
    CHECK(x == y);
  }
}

TEST_CASE("positions") {
  const fs::path& d = workdir();
  const Run r = cli("positions --model " + q(d / "model.faag") + " --wav " + q(d / "held" / "utt_000.wav") +
                    " --phrase \"go\" --iterations 10 --report " + q(d / "pos" / "rows.jsonl") + " --out-dir " +
                    q(d / "pos"));
  REQUIRE(r.code == 0);
  const auto rows = jsonl(d / "pos" / "rows.jsonl");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["position"] == "begin");
  CHECK(rows[1]["position"] == "middle");
  CHECK(rows[2]["position"] == "end");
  CHECK(fs::exists(d / "pos" / "adv_end.wav"));
}

TEST_CASE("defend") {
  const fs::path& d = workdir();
  const fs::path wav = d / "held" / "utt_000.wav";
  const Run r = cli("defend --model " + q(d / "model.faag") + " --benign " + q(wav) + " --suspicious " + q(wav) +
                    " --phrase \"call red\" --out " + q(d / "def" / "report.json"));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(d / "def" / "report.json"));
  for (const char* k : {"transcript", "phrase_in_transcript", "attack_success_rate", "transcription_accuracy"})
    CHECK(j.contains(k));
  CHECK(j["phrase_in_transcript"] == false);

  write_wav(Waveform(std::vector<double>(2000, 0.1), 8000), d / "slow.wav");
  const Run mismatch = cli("defend --model " + q(d / "model.faag") + " --benign " + q(wav) + " --suspicious " +
                           q(d / "slow.wav") + " --phrase go");
  CHECK(mismatch.code == exit_code(ErrorCode::kRateMismatch));
}

TEST_CASE("bench") {
  const fs::path& d = workdir();
  std::ofstream(d / "phrases.txt") << "go\n";
  auto bench = [&](const std::string& name) {
    const Run r = cli("bench --model " + q(d / "model.faag") + " --corpus " + q(d / "held") + " --phrases " +
                      q(d / "phrases.txt") + " --iterations 10 --jobs 4 --report " + q(d / "bench" / name));
    REQUIRE(r.code == 0);
    CHECK(r.output.find("mean speedup") != std::string::npos);
    return jsonl(d / "bench" / name);
  };
  const auto a = bench("a.jsonl");
  const auto b = bench("b.jsonl");
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]["ratio_frames"].get<double>() > 0.0);
    CHECK(a[i]["ratio_frames"].get<double>() <= 1.0);
    CHECK(a[i]["faag_window_ops"] == b[i]["faag_window_ops"]);
    CHECK(a[i]["baseline_window_ops"] == b[i]["baseline_window_ops"]);
  }
  CHECK(fs::exists(d / "bench" / "faag_bench.manifest.json"));
}
