#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "faag/audio.hpp"
#include "faag/features.hpp"
#include "faag/model.hpp"

namespace faag {

struct Utterance {
  Waveform audio;
  std::string transcript;
};

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;  // shuffles the utterance order each epoch

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double cer = 0.0;  // corpus CER after the epoch
};

struct TrainResult {
  AcousticModel model;
  std::vector<EpochRecord> log;
};

// The synthetic corpus draws words from this fixed vocabulary.
const std::vector<std::string>& synth_vocabulary();

// Tone assigned to a letter: 26 log-spaced frequencies from 300 Hz to 3000 Hz.
double letter_frequency(char letter);

// Each letter is a pure tone lasting 4 * step samples (with short raised-cosine
// ramps), a space is 4 * step samples of silence, and (window - step) samples of
// silence close the utterance, so a k-character transcript spans exactly 4k
// analysis windows.
Waveform render_text(std::string_view text, const FrameParams& p = {},
                     int sample_rate = kDefaultSampleRate);

// n utterances of `words` vocabulary words each, drawn by mt19937_64(seed).
// Throws InvalidInput when n < 1 or words < 1.
std::vector<Utterance> synth_corpus(int n_utterances, int words_per_utterance, std::uint64_t seed,
                                    const FrameParams& p = {}, int sample_rate = kDefaultSampleRate);

// Per-utterance Adam steps on the CTC loss. Deterministic given the model, the
// corpus order and cfg.seed. Throws Unalignable for a transcript that cannot
// fit its audio and Divergence when the loss stops being finite.
TrainResult train(const AcousticModel& model, const std::vector<Utterance>& corpus,
                  const TrainConfig& cfg, const FrameParams& p = {});

// Mean character error rate of greedy decodes against the transcripts.
double evaluate(const AcousticModel& model, const std::vector<Utterance>& corpus,
                const FrameParams& p = {});

// Directory layout: <name>.wav files plus manifest.tsv with
// "<filename>\t<transcript>" per line.
void write_corpus(const std::vector<Utterance>& corpus, const std::filesystem::path& dir);
std::vector<Utterance> load_corpus(const std::filesystem::path& dir);

}  // namespace faag
