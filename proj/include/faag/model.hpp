#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "faag/alphabet.hpp"
#include "faag/features.hpp"

namespace faag {

// T x 28 pre-softmax scores, one row per analysis window.
using LogitMatrix = RowMatrix;

// Single-layer tanh recurrence followed by a linear projection onto the
// alphabet plus blank:
//   h_t      = tanh(w_in f_t + w_rec h_{t-1} + b_rec),  h_0 = 0
//   logits_t = w_out h_t + b_out
struct AcousticModel {
  int input_dim = 0;
  int hidden_dim = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd w_in;   // hidden x input
  Eigen::MatrixXd w_rec;  // hidden x hidden
  Eigen::VectorXd b_rec;  // hidden
  Eigen::MatrixXd w_out;  // classes x hidden
  Eigen::VectorXd b_out;  // classes

  int class_count() const { return static_cast<int>(b_out.size()); }

  bool operator==(const AcousticModel& other) const;
};

// Same layout as the model; used for gradients and optimizer state.
struct ModelGradients {
  Eigen::MatrixXd w_in;
  Eigen::MatrixXd w_rec;
  Eigen::VectorXd b_rec;
  Eigen::MatrixXd w_out;
  Eigen::VectorXd b_out;

  static ModelGradients zeros_like(const AcousticModel& m);
};

struct ForwardResult {
  LogitMatrix logits;
  RowMatrix hidden;  // T x hidden, h_1..h_T
};

struct BackwardResult {
  ModelGradients params;       // left empty when parameter gradients are skipped
  FeatureMatrix input_grad;    // T x input_dim
};

enum class GradientTargets { kAll, kInputsOnly };

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from mt19937_64(seed),
// drawn in the order w_in, w_rec, w_out and rounded to float precision so the
// model survives a save/load round trip bit-exactly. Biases start at zero.
// Throws InvalidDim when a dimension is not positive.
AcousticModel init_model(int input_dim, int hidden_dim, std::uint64_t seed,
                         int class_count = Alphabet::kClassCount);

// Throws DimMismatch when features.cols() != m.input_dim, TooShort on T == 0.
ForwardResult forward(const AcousticModel& m, const FeatureMatrix& features);

// Backpropagation through time. Throws ShapeMismatch when the trace or the
// upstream gradient does not match the features.
BackwardResult backward(const AcousticModel& m, const FeatureMatrix& features,
                        const ForwardResult& trace, const LogitMatrix& grad_logits,
                        GradientTargets targets = GradientTargets::kAll);

// Per-row argmax (lowest index wins ties), merge repeats, drop blanks.
std::string greedy_decode(const LogitMatrix& logits);

// Argmax class index per row, ties toward the lowest index.
std::vector<int> best_path(const LogitMatrix& logits);

// MFCC -> forward -> greedy decode.
std::string transcribe(const AcousticModel& m, const Waveform& x, const FrameParams& p);
std::string transcribe(const AcousticModel& m, const MfccFrontEnd& front_end,
                       std::span<const double> samples);

// Binary model file:
//   "FAAGMDL1" | u32 input_dim | u32 hidden_dim | u64 seed |
//   w_in, w_rec, b_rec, w_out, b_out as row-major f32 | u32 CRC32
// All integers and floats little-endian; the CRC covers every preceding byte.
void save_model(const AcousticModel& m, const std::filesystem::path& path);
AcousticModel load_model(const std::filesystem::path& path);

// CRC32 of the model file contents, for run manifests.
std::uint32_t model_file_crc(const std::filesystem::path& path);

// Rounds every parameter to the nearest float.
void round_to_float(AcousticModel& m);

}  // namespace faag
