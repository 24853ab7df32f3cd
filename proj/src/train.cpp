#include "faag/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "faag/adam.hpp"
#include "faag/ctc.hpp"
#include "faag/error.hpp"
#include "faag/eval.hpp"

namespace faag {

namespace {

constexpr double kToneAmplitude = 0.5;
constexpr int kWindowsPerCharacter = 4;

std::string utterance_name(std::size_t i) {
  std::ostringstream name;
  name << "utt_" << std::setw(3) << std::setfill('0') << i << ".wav";
  return name.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::kInvalidInput, "epochs must be non-negative");
  if (!(learning_rate > 0.0) || !(adam_eps > 0.0))
    throw Error(ErrorCode::kInvalidInput, "learning rate and eps must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw Error(ErrorCode::kInvalidInput, "Adam betas must lie in (0, 1)");
}

const std::vector<std::string>& synth_vocabulary() {
  static const std::vector<std::string> words = {"call", "red",   "open", "door", "play", "blue",
                                                 "stop", "green", "turn", "left", "go",   "home",
                                                 "send", "help",  "now",  "yes"};
  return words;
}

double letter_frequency(char letter) {
  if (letter < 'a' || letter > 'z')
    throw Error(ErrorCode::kInvalidInput, std::string("no tone for '") + letter + "'");
  return 300.0 * std::pow(10.0, (letter - 'a') / 25.0);
}

Waveform render_text(std::string_view text, const FrameParams& p, int sample_rate) {
  p.validate();
  if (!is_valid_transcript(text))
    throw Error(ErrorCode::kInvalidInput, "transcript must be non-empty lowercase a-z and spaces");
  const auto segment = static_cast<std::size_t>(kWindowsPerCharacter * p.step);
  const std::size_t ramp = std::max<std::size_t>(1, static_cast<std::size_t>(p.step) / 5);
  std::vector<double> samples;
  samples.reserve(text.size() * segment + static_cast<std::size_t>(p.window_size - p.step));
  for (char c : text) {
    if (c == ' ') {
      samples.insert(samples.end(), segment, 0.0);
      continue;
    }
    const double omega = 2.0 * std::numbers::pi * letter_frequency(c) / sample_rate;
    for (std::size_t i = 0; i < segment; ++i) {
      double envelope = 1.0;
      const std::size_t edge = std::min(i, segment - 1 - i);
      if (edge < ramp) envelope = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) / ramp);
      samples.push_back(kToneAmplitude * envelope * std::sin(omega * static_cast<double>(i)));
    }
  }
  samples.insert(samples.end(), static_cast<std::size_t>(p.window_size - p.step), 0.0);
  return Waveform(std::move(samples), sample_rate);
}

std::vector<Utterance> synth_corpus(int n_utterances, int words_per_utterance, std::uint64_t seed,
                                    const FrameParams& p, int sample_rate) {
  if (n_utterances < 1 || words_per_utterance < 1)
    throw Error(ErrorCode::kInvalidInput, "corpus needs at least one utterance of at least one word");
  const auto& vocab = synth_vocabulary();
  std::mt19937_64 rng(seed);
  std::vector<Utterance> corpus;
  corpus.reserve(static_cast<std::size_t>(n_utterances));
  for (int u = 0; u < n_utterances; ++u) {
    std::string text;
    for (int w = 0; w < words_per_utterance; ++w) {
      if (w > 0) text.push_back(' ');
      text += vocab[rng() % vocab.size()];
    }
    corpus.push_back({render_text(text, p, sample_rate), text});
  }
  return corpus;
}

TrainResult train(const AcousticModel& model, const std::vector<Utterance>& corpus,
                  const TrainConfig& cfg, const FrameParams& p) {
  cfg.validate();
  if (corpus.empty()) throw Error(ErrorCode::kInvalidInput, "training corpus is empty");

  std::vector<FeatureMatrix> features;
  std::vector<TargetLabels> targets;
  for (const auto& u : corpus) {
    features.push_back(MfccFrontEnd(p, u.audio.sample_rate()).forward(u.audio.samples()));
    targets.push_back(TargetLabels::from_text(u.transcript));
    const auto needed = min_alignment_length(targets.back().labels);
    if (static_cast<std::size_t>(features.back().rows()) < needed)
      throw Error(ErrorCode::kUnalignable, "\"" + u.transcript + "\" needs " + std::to_string(needed) +
                                               " windows, audio has " + std::to_string(features.back().rows()));
  }

  TrainResult result{model, {}};
  AcousticModel& m = result.model;
  const AdamParams adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  Adam opt_w_in(static_cast<std::size_t>(m.w_in.size()), adam);
  Adam opt_w_rec(static_cast<std::size_t>(m.w_rec.size()), adam);
  Adam opt_b_rec(static_cast<std::size_t>(m.b_rec.size()), adam);
  Adam opt_w_out(static_cast<std::size_t>(m.w_out.size()), adam);
  Adam opt_b_out(static_cast<std::size_t>(m.b_out.size()), adam);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates with a fixed draw rule so the order is library-independent.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double total = 0.0;
    for (std::size_t i : order) {
      const ForwardResult fwd = forward(m, features[i]);
      const CtcLoss loss = ctc_loss(fwd.logits, targets[i]);
      if (!std::isfinite(loss.loss))
        throw Error(ErrorCode::kDivergence, "loss became non-finite in epoch " + std::to_string(epoch));
      total += loss.loss;
      const BackwardResult grads = backward(m, features[i], fwd, loss.grad_logits);
      ++step;
      opt_w_in.update(m.w_in, grads.params.w_in, step);
      opt_w_rec.update(m.w_rec, grads.params.w_rec, step);
      opt_b_rec.update(m.b_rec, grads.params.b_rec, step);
      opt_w_out.update(m.w_out, grads.params.w_out, step);
      opt_b_out.update(m.b_out, grads.params.b_out, step);
      round_to_float(m);
    }
    result.log.push_back({epoch, total / static_cast<double>(corpus.size()), evaluate(m, corpus, p)});
  }
  return result;
}

double evaluate(const AcousticModel& model, const std::vector<Utterance>& corpus, const FrameParams& p) {
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const auto& u : corpus) total += cer(u.transcript, transcribe(model, u.audio, p)).cer;
  return total / static_cast<double>(corpus.size());
}

void write_corpus(const std::vector<Utterance>& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.tsv", std::ios::trunc);
  if (!manifest) throw Error(ErrorCode::kIo, "cannot write " + (dir / "manifest.tsv").string());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string name = utterance_name(i);
    write_wav(corpus[i].audio, dir / name);
    manifest << name << '\t' << corpus[i].transcript << '\n';
  }
}

std::vector<Utterance> load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.tsv";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw Error(ErrorCode::kIo, "missing manifest " + manifest_path.string());
  std::vector<Utterance> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::kIo, manifest_path.string() + ":" + std::to_string(line_no) + ": expected <file>\\t<transcript>");
    std::string transcript = line.substr(tab + 1);
    if (!is_valid_transcript(transcript))
      throw Error(ErrorCode::kInvalidInput, manifest_path.string() + ":" + std::to_string(line_no) +
                                                ": transcript must be lowercase a-z and spaces");
    corpus.push_back({read_wav(dir / line.substr(0, tab)), std::move(transcript)});
  }
  if (corpus.empty()) throw Error(ErrorCode::kIo, manifest_path.string() + " lists no utterances");
  return corpus;
}

}  // namespace faag
