// faag: command-line front end for corpus synthesis, training, attacks and evaluation.
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "faag/attack.hpp"
#include "faag/error.hpp"
#include "faag/eval.hpp"
#include "faag/report.hpp"
#include "faag/train.hpp"

namespace fs = std::filesystem;
using namespace faag;

namespace {

constexpr int kUsageError = 2;
constexpr int kOtherError = 1;

std::string exit_code_table() {
  std::string s =
      "Exit codes:\n"
      "  0   success\n"
      "  1   unexpected internal error\n"
      "  2   usage error (bad flags or values)\n";
  for (int c = static_cast<int>(ErrorCode::kInvalidInput); c <= static_cast<int>(ErrorCode::kEmptyTarget); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    s += "  " + std::to_string(exit_code(code)) + (exit_code(code) < 100 ? "  " : " ") + std::string(error_name(code)) + "\n";
  }
  s += "\nConfig files (--config) are TOML; sections name subcommands, e.g. [attack] lr = 100.\n"
       "Precedence: command line, then config file, then FAAG_SEED for seeds, then defaults.";
  return s;
}

// Options shared by every attack-style subcommand.
struct AttackFlags {
  std::string model;
  std::string wav;
  std::string phrase;
  std::string position = "begin";
  std::string suffix = "spaces";
  int lambda = 0;
  int iterations = 1000;
  double lr = 10.0;
  double initial_con = 40.0;
  int check_every = 100;
  double l2 = 1e-3;
  std::uint64_t seed = 0;
  std::string report;
  int jobs = 1;

  AttackConfig config() const {
    AttackConfig cfg;
    cfg.iterations = iterations;
    cfg.learning_rate = lr;
    cfg.initial_con = initial_con;
    cfg.check_every = check_every;
    cfg.l2_weight = l2;
    cfg.seed = seed;
    return cfg;
  }
};

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "PRNG seed (recorded in the run manifest)")->envname("FAAG_SEED")->capture_default_str();
}

void add_attack_flags(CLI::App* cmd, AttackFlags& f, bool with_lambda) {
  cmd->add_option("--model", f.model, "model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--wav", f.wav, "16-bit mono WAV to attack")->required()->check(CLI::ExistingFile);
  cmd->add_option("--phrase", f.phrase, "target phrase, lowercase a-z and spaces")->required();
  cmd->add_option("--suffix", f.suffix, "separator after the phrase")
      ->check(CLI::IsMember({"spaces", "and", "space"}))
      ->capture_default_str();
  if (with_lambda) cmd->add_option("--lambda", f.lambda, "extra characters of clip")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--iterations", f.iterations, "optimizer iterations")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr", f.lr, "Adam step size in int16 amplitude units")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--initial-con", f.initial_con, "initial dB budget relative to the clip")->capture_default_str();
  cmd->add_option("--check-every", f.check_every, "checkpoint interval")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--l2", f.l2, "weight of the squared-norm penalty")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--report", f.report, "JSONL file to append result rows to");
  add_seed(cmd, f.seed);
}

fs::path parent_or_cwd(const fs::path& p) {
  const fs::path dir = p.parent_path();
  return dir.empty() ? fs::path(".") : dir;
}

nlohmann::json option_snapshot(const CLI::App* cmd) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    const std::string key = opt->get_single_name();
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[key] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
    } else {
      j[key] = opt->get_default_str();
    }
  }
  return j;
}

struct Manifest {
  nlohmann::json doc = nlohmann::json::object();

  Manifest(const CLI::App* cmd, const std::vector<std::string>& argv) {
    doc["tool"] = "faag";
    doc["tool_version"] = kToolVersion;
    doc["command"] = cmd->get_name();
    doc["argv"] = argv;
    doc["options"] = option_snapshot(cmd);
    doc["seeds"] = nlohmann::json::object();
    doc["outputs"] = nlohmann::json::array();
  }
  void model(const fs::path& path) {
    doc["model_path"] = path.string();
    doc["model_crc32"] = model_file_crc(path);
  }
  void output(const fs::path& path) { doc["outputs"].push_back(path.string()); }
  void write(const fs::path& dir) {
    fs::create_directories(dir);
    const fs::path path = dir / ("faag_" + doc["command"].get<std::string>() + ".manifest.json");
    write_json(path, doc);
  }
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results land by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void print_result(const AttackResult& r) {
  std::printf("%-6s lambda=%d success=%.4f distortion_db=%.3f ratio_frames=%.4f wall=%.2fs transcript=\"%s\"\n",
              std::string(to_string(r.position)).c_str(), r.lambda, r.success_rate, r.distortion_db, r.ratio_frames,
              r.wall_time_seconds, r.transcript.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FAAG: fast targeted adversarial audio against a toy CTC recognizer", "faag"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.footer(exit_code_table());
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  // synth
  struct {
    std::string out;
    int n = 20;
    int words = 3;
    std::uint64_t seed = 0;
  } synth;
  auto* cmd_synth = app.add_subcommand("synth", "write a synthetic tone corpus (WAVs + manifest.tsv)");
  cmd_synth->add_option("--out", synth.out, "output directory")->required();
  cmd_synth->add_option("--n", synth.n, "number of utterances")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--words", synth.words, "words per utterance")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(cmd_synth, synth.seed);

  // train
  struct {
    std::string corpus;
    std::string out;
    std::string log;
    int epochs = 30;
    int hidden = 128;
    double lr = 1e-3;
    std::uint64_t seed = 0;
  } tr;
  auto* cmd_train = app.add_subcommand("train", "train the acoustic model on a corpus directory");
  cmd_train->add_option("--corpus", tr.corpus, "corpus directory with manifest.tsv")->required();
  cmd_train->add_option("--out", tr.out, "model file to write")->required();
  cmd_train->add_option("--log", tr.log, "training log JSONL (default: <out>.train.jsonl)");
  cmd_train->add_option("--epochs", tr.epochs, "training epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_train->add_option("--hidden", tr.hidden, "recurrent units")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(cmd_train, tr.seed);

  // transcribe
  struct {
    std::string model;
    std::string wav;
    std::string manifest_dir = ".";
  } tx;
  auto* cmd_tx = app.add_subcommand("transcribe", "print the model's greedy transcription of a WAV");
  cmd_tx->add_option("--model", tx.model, "model file")->required();
  cmd_tx->add_option("--wav", tx.wav, "WAV file")->required();
  cmd_tx->add_option("--manifest-dir", tx.manifest_dir, "where to write the run manifest")->capture_default_str();

  // attack
  AttackFlags atk;
  std::string atk_out;
  auto* cmd_attack = app.add_subcommand("attack", "attack one clip of a WAV");
  add_attack_flags(cmd_attack, atk, true);
  cmd_attack->add_option("--position", atk.position, "where the phrase goes")
      ->check(CLI::IsMember({"begin", "middle", "end"}))
      ->capture_default_str();
  cmd_attack->add_option("--out", atk_out, "adversarial WAV to write")->required();

  // sweep
  AttackFlags swp;
  std::vector<int> lambdas{0, 1, 2, 3};
  std::string swp_out;
  auto* cmd_sweep = app.add_subcommand("sweep", "attack once per lambda and report every run");
  add_attack_flags(cmd_sweep, swp, false);
  cmd_sweep->add_option("--position", swp.position, "where the phrase goes")
      ->check(CLI::IsMember({"begin", "middle", "end"}))
      ->capture_default_str();
  cmd_sweep->add_option("--lambdas", lambdas, "comma-separated lambdas")->delimiter(',')->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_sweep->add_option("--out", swp_out, "adversarial WAV of the best run");
  cmd_sweep->add_option("--jobs", swp.jobs, "attacks to run in parallel")->check(CLI::PositiveNumber)->capture_default_str();

  // positions
  AttackFlags pos;
  std::string pos_out_dir;
  auto* cmd_pos = app.add_subcommand("positions", "attack the begin, middle and end clips of one WAV");
  add_attack_flags(cmd_pos, pos, true);
  cmd_pos->add_option("--out-dir", pos_out_dir, "directory for adv_<position>.wav files");
  cmd_pos->add_option("--jobs", pos.jobs, "attacks to run in parallel")->check(CLI::PositiveNumber)->capture_default_str();

  // defend
  struct {
    std::string model;
    std::string benign;
    std::string suspicious;
    std::string phrase;
    std::string benign_text;
    std::string suspicious_text;
    std::string out;
  } def;
  auto* cmd_def = app.add_subcommand("defend", "prepend benign audio to a suspicious WAV and check the phrase");
  cmd_def->add_option("--model", def.model, "model file")->required();
  cmd_def->add_option("--benign", def.benign, "benign WAV placed first")->required();
  cmd_def->add_option("--suspicious", def.suspicious, "suspicious WAV")->required();
  cmd_def->add_option("--phrase", def.phrase, "phrase to look for")->required();
  cmd_def->add_option("--benign-text", def.benign_text, "ground truth of the benign WAV (default: its transcription)");
  cmd_def->add_option("--suspicious-text", def.suspicious_text,
                      "ground truth of the suspicious WAV before tampering (default: its transcription)");
  cmd_def->add_option("--out", def.out, "DefenseReport JSON to write (default: print only)");

  // bench
  struct {
    std::string corpus;
    std::string phrases;
    int iterations = 1000;
    int lambda = 0;
    double lr = 10.0;
    int jobs = 1;
    std::string report;
    std::uint64_t seed = 0;
    std::string model;
  } bench;
  auto* cmd_bench = app.add_subcommand("bench", "time FAAG against the whole-audio baseline");
  cmd_bench->add_option("--model", bench.model, "model file")->required();
  cmd_bench->add_option("--corpus", bench.corpus, "corpus directory with manifest.tsv")->required();
  cmd_bench->add_option("--phrases", bench.phrases, "text file, one target phrase per line")->required();
  cmd_bench->add_option("--iterations", bench.iterations, "iterations per run")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_bench->add_option("--lambda", bench.lambda, "lambda for the FAAG runs")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_bench->add_option("--lr", bench.lr, "Adam step size in int16 amplitude units")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_bench->add_option("--jobs", bench.jobs, "ignored: timed runs are always sequential")->capture_default_str();
  cmd_bench->add_option("--report", bench.report, "JSONL file for per-run rows")->required();
  add_seed(cmd_bench, bench.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*cmd_synth) {
      Manifest m(cmd_synth, args);
      m.doc["seeds"]["corpus"] = synth.seed;
      const auto corpus = synth_corpus(synth.n, synth.words, synth.seed);
      write_corpus(corpus, synth.out);
      m.output(fs::path(synth.out) / "manifest.tsv");
      m.write(synth.out);
      std::printf("wrote %zu utterances to %s\n", corpus.size(), synth.out.c_str());
    } else if (*cmd_train) {
      Manifest m(cmd_train, args);
      const auto corpus = load_corpus(tr.corpus);
      TrainConfig cfg;
      cfg.epochs = tr.epochs;
      cfg.learning_rate = tr.lr;
      cfg.seed = tr.seed;
      const AcousticModel init = init_model(13, tr.hidden, tr.seed);
      const TrainResult result = train(init, corpus, cfg);
      fs::create_directories(parent_or_cwd(tr.out));
      save_model(result.model, tr.out);
      const fs::path log = tr.log.empty() ? fs::path(tr.out + ".train.jsonl") : fs::path(tr.log);
      fs::remove(log);
      for (const auto& e : result.log) append_jsonl(log, to_json(e));
      const double final_cer = evaluate(result.model, corpus);
      m.doc["seeds"]["init"] = tr.seed;
      m.doc["seeds"]["shuffle"] = tr.seed;
      m.doc["train_config"] = to_json(cfg);
      m.doc["final_cer"] = final_cer;
      m.model(tr.out);
      m.output(tr.out);
      m.output(log);
      m.write(parent_or_cwd(tr.out));
      std::printf("final CER %.4f\n", final_cer);
    } else if (*cmd_tx) {
      Manifest m(cmd_tx, args);
      const AcousticModel model = load_model(tx.model);
      const Waveform x = read_wav(tx.wav);
      const std::string text = transcribe(model, x, {});
      m.model(tx.model);
      m.doc["transcript"] = text;
      m.write(tx.manifest_dir);
      std::printf("%s\n", text.c_str());
    } else if (*cmd_attack) {
      Manifest m(cmd_attack, args);
      const AcousticModel model = load_model(atk.model);
      const Waveform x = read_wav(atk.wav);
      const TargetPhrase t(atk.phrase, parse_suffix(atk.suffix));
      const ClipPlan plan = select_clip(x, t, model, {}, atk.lambda, parse_position(atk.position));
      const AttackResult r = run_attack(x, t, model, plan, atk.config());
      fs::create_directories(parent_or_cwd(atk_out));
      write_wav(r.adversarial, atk_out);
      const fs::path report = atk.report.empty() ? fs::path(atk_out + ".jsonl") : fs::path(atk.report);
      auto row = to_json(r);
      row["input"] = atk.wav;
      row["output"] = atk_out;
      append_jsonl(report, row);
      m.model(atk.model);
      m.doc["seeds"]["attack"] = atk.seed;
      m.doc["attack_config"] = to_json(atk.config());
      m.doc["clip_plan"] = to_json(plan);
      m.output(atk_out);
      m.output(report);
      m.write(parent_or_cwd(atk_out));
      print_result(r);
    } else if (*cmd_sweep || *cmd_pos) {
      const bool is_sweep = static_cast<bool>(*cmd_sweep);
      const AttackFlags& f = is_sweep ? swp : pos;
      Manifest m(is_sweep ? cmd_sweep : cmd_pos, args);
      const AcousticModel model = load_model(f.model);
      const Waveform x = read_wav(f.wav);
      const TargetPhrase t(f.phrase, parse_suffix(f.suffix));
      const ClipGeometry geometry = measure_clip_geometry(x, model, {});
      std::vector<ClipPlan> plans;
      if (is_sweep) {
        const Position p = parse_position(f.position);
        for (int l : lambdas) plans.push_back(plan_clip(geometry, t.effective_text(p).size(), l, p));
      } else {
        for (Position p : {Position::kBegin, Position::kMiddle, Position::kEnd})
          plans.push_back(plan_clip(geometry, t.effective_text(p).size(), f.lambda, p));
      }
      std::vector<std::optional<AttackResult>> results(plans.size());
      parallel_for(plans.size(), f.jobs, [&](std::size_t i) { results[i] = run_attack(x, t, model, plans[i], f.config()); });

      const fs::path report = f.report.empty() ? fs::path(std::string(is_sweep ? "sweep" : "positions") + ".jsonl")
                                                : fs::path(f.report);
      std::vector<AttackResult> runs;
      for (auto& r : results) runs.push_back(std::move(*r));
      for (const auto& r : runs) {
        auto row = to_json(r);
        row["input"] = f.wav;
        append_jsonl(report, row);
        print_result(r);
      }
      m.model(f.model);
      m.doc["seeds"]["attack"] = f.seed;
      m.doc["attack_config"] = to_json(f.config());
      m.output(report);
      fs::path manifest_dir = parent_or_cwd(report);
      if (is_sweep) {
        const std::size_t best = best_run(runs);
        std::printf("best lambda %d\n", runs[best].lambda);
        if (!swp_out.empty()) {
          fs::create_directories(parent_or_cwd(swp_out));
          write_wav(runs[best].adversarial, swp_out);
          m.output(swp_out);
        }
      } else if (!pos_out_dir.empty()) {
        fs::create_directories(pos_out_dir);
        for (const auto& r : runs) {
          const fs::path out = fs::path(pos_out_dir) / ("adv_" + std::string(to_string(r.position)) + ".wav");
          write_wav(r.adversarial, out);
          m.output(out);
        }
        manifest_dir = pos_out_dir;
      }
      m.write(manifest_dir);
    } else if (*cmd_def) {
      Manifest m(cmd_def, args);
      const AcousticModel model = load_model(def.model);
      const Waveform benign = read_wav(def.benign);
      const Waveform suspicious = read_wav(def.suspicious);
      const std::string benign_text = def.benign_text.empty() ? transcribe(model, benign, {}) : def.benign_text;
      const std::string suspicious_text =
          def.suspicious_text.empty() ? transcribe(model, suspicious, {}) : def.suspicious_text;
      const DefenseReport r = eval_defense(benign, suspicious, model, def.phrase, {benign_text, suspicious_text});
      const auto j = to_json(r);
      m.model(def.model);
      if (!def.out.empty()) {
        write_json(def.out, j);
        m.output(def.out);
      }
      m.write(def.out.empty() ? fs::path(".") : parent_or_cwd(def.out));
      std::printf("%s\n", j.dump(2).c_str());
    } else if (*cmd_bench) {
      Manifest m(cmd_bench, args);
      if (bench.jobs != 1) std::fprintf(stderr, "note: bench runs sequentially; --jobs %d ignored\n", bench.jobs);
      const AcousticModel model = load_model(bench.model);
      std::vector<Waveform> audios;
      for (const auto& u : load_corpus(bench.corpus)) audios.push_back(u.audio);
      std::vector<TargetPhrase> phrases;
      std::ifstream in(bench.phrases);
      if (!in) throw Error(ErrorCode::kIo, "cannot read phrases file " + bench.phrases);
      for (std::string line; std::getline(in, line);)
        if (!line.empty()) phrases.emplace_back(line);
      AttackConfig cfg;
      cfg.iterations = bench.iterations;
      cfg.learning_rate = bench.lr;
      cfg.seed = bench.seed;
      const BenchReport report = bench_speedup(audios, phrases, model, cfg, {}, bench.lambda);
      fs::remove(bench.report);
      std::printf("%5s  %-16s %7s %9s %9s %8s %9s\n", "audio", "phrase", "ratio", "faag_s", "base_s", "speedup", "op_ratio");
      for (const auto& row : report.rows) {
        append_jsonl(bench.report, to_json(row));
        std::printf("%5zu  %-16s %7.3f %9.3f %9.3f %8.3f %9.3f\n", row.audio_index, row.phrase.c_str(), row.ratio_frames,
                    row.faag_seconds, row.baseline_seconds, row.speedup,
                    static_cast<double>(row.faag_window_ops) / static_cast<double>(row.baseline_window_ops));
      }
      std::printf("mean speedup %.4f, mean window-op ratio %.4f\n", report.mean_speedup(), report.mean_window_op_ratio());
      m.model(bench.model);
      m.doc["seeds"]["attack"] = bench.seed;
      m.doc["attack_config"] = to_json(cfg);
      m.doc["mean_speedup"] = report.mean_speedup();
      m.output(bench.report);
      m.write(parent_or_cwd(bench.report));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(error_name(e.code())).c_str(), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOtherError;
  }
  return 0;
}
