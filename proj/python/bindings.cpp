#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "faag/attack.hpp"
#include "faag/ctc.hpp"
#include "faag/error.hpp"
#include "faag/eval.hpp"
#include "faag/report.hpp"
#include "faag/train.hpp"

namespace py = pybind11;
using namespace faag;

namespace {

Waveform to_waveform(py::array_t<double, py::array::c_style | py::array::forcecast> samples, int rate) {
  if (samples.ndim() != 1) throw Error(ErrorCode::kInvalidInput, "samples must be one-dimensional");
  return Waveform(std::vector<double>(samples.data(), samples.data() + samples.size()), rate);
}

py::array_t<double> to_numpy(const Waveform& w) {
  const auto s = w.samples();
  return py::array_t<double>(static_cast<py::ssize_t>(s.size()), s.data());
}

py::dict result_dict(const AttackResult& r) {
  py::dict d = py::module_::import("json").attr("loads")(to_json(r).dump());
  d["adversarial"] = to_numpy(r.adversarial);
  d["sample_rate"] = r.adversarial.sample_rate();
  return d;
}

py::dict json_dict(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_faag, m) {
  m.doc() = "FAAG toolkit: toy CTC recognizer, clip-selecting targeted attack, metrics";

  // Owned by the module for the life of the interpreter.
  static py::handle faag_error = py::exception<Error>(m, "FaagError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = faag_error(e.what());
      exc.attr("code") = std::string(error_name(e.code()));
      PyErr_SetObject(faag_error.ptr(), exc.ptr());
    }
  });
  m.attr("__version__") = kToolVersion;

  // audio
  m.def("read_wav", [](const std::filesystem::path& path) {
    const Waveform w = read_wav(path);
    return py::make_tuple(to_numpy(w), w.sample_rate());
  }, py::arg("path"), "Returns (samples, sample_rate).");
  m.def("write_wav", [](py::array_t<double> samples, const std::filesystem::path& path, int rate) {
    write_wav(to_waveform(samples, rate), path);
  }, py::arg("samples"), py::arg("path"), py::arg("sample_rate") = kDefaultSampleRate);
  m.def("loudness_db", [](py::array_t<double> s) { return loudness_db(to_waveform(s, kDefaultSampleRate)).db; });
  m.def("distortion_db", [](py::array_t<double> original, py::array_t<double> adversarial) {
    return distortion_db(to_waveform(original, kDefaultSampleRate), to_waveform(adversarial, kDefaultSampleRate)).db;
  });

  // features
  py::class_<FrameParams>(m, "FrameParams")
      .def(py::init<>())
      .def_readwrite("window_size", &FrameParams::window_size)
      .def_readwrite("step", &FrameParams::step)
      .def_readwrite("n_mels", &FrameParams::n_mels)
      .def_readwrite("n_coeffs", &FrameParams::n_coeffs);
  m.def("frame_count", &frame_count, py::arg("len_samples"), py::arg("params") = FrameParams{});
  m.def("mfcc", [](py::array_t<double> s, int rate, const FrameParams& p) {
    return RowMatrix(mfcc_forward(to_waveform(s, rate), p));
  }, py::arg("samples"), py::arg("sample_rate") = kDefaultSampleRate, py::arg("params") = FrameParams{});

  // model
  py::class_<AcousticModel>(m, "AcousticModel")
      .def_readonly("input_dim", &AcousticModel::input_dim)
      .def_readonly("hidden_dim", &AcousticModel::hidden_dim)
      .def_readonly("seed", &AcousticModel::seed)
      .def_readonly("w_in", &AcousticModel::w_in)
      .def_readonly("w_rec", &AcousticModel::w_rec)
      .def_readonly("b_rec", &AcousticModel::b_rec)
      .def_readonly("w_out", &AcousticModel::w_out)
      .def_readonly("b_out", &AcousticModel::b_out)
      .def("__eq__", &AcousticModel::operator==);
  m.def("init_model", [](int in, int hidden, std::uint64_t seed) { return init_model(in, hidden, seed); },
        py::arg("input_dim") = 13, py::arg("hidden_dim") = 128, py::arg("seed") = 0);
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def("logits", [](const AcousticModel& model, py::array_t<double> s, int rate) {
    return RowMatrix(forward(model, mfcc_forward(to_waveform(s, rate), {})).logits);
  }, py::arg("model"), py::arg("samples"), py::arg("sample_rate") = kDefaultSampleRate);
  m.def("greedy_decode", [](const RowMatrix& logits) { return greedy_decode(logits); });
  m.def("transcribe", [](const AcousticModel& model, py::array_t<double> s, int rate) {
    return transcribe(model, to_waveform(s, rate), {});
  }, py::arg("model"), py::arg("samples"), py::arg("sample_rate") = kDefaultSampleRate);

  // ctc
  m.def("ctc_loss", [](const RowMatrix& logits, std::vector<int> labels) {
    const CtcLoss r = ctc_loss(logits, TargetLabels{std::move(labels)});
    return py::make_tuple(r.loss, RowMatrix(r.grad_logits));
  }, py::arg("logits"), py::arg("labels"), "Returns (loss, d loss / d logits); the blank is the last column.");
  m.def("ctc_loss_bruteforce", [](const RowMatrix& logits, std::vector<int> labels) {
    return ctc_loss_bruteforce(logits, TargetLabels{std::move(labels)});
  });
  m.def("encode", [](const std::string& text) { return Alphabet::encode(text); });

  // train
  m.def("render_text", [](const std::string& text) { return to_numpy(render_text(text)); });
  m.def("synth_corpus", [](int n, int words, std::uint64_t seed) {
    py::list out;
    for (const auto& u : synth_corpus(n, words, seed)) out.append(py::make_tuple(to_numpy(u.audio), u.transcript));
    return out;
  }, py::arg("n"), py::arg("words_per_utterance") = 3, py::arg("seed") = 0);
  m.def("train", [](const AcousticModel& model, int n, int words, std::uint64_t corpus_seed, int epochs, double lr,
                    std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    py::gil_scoped_release release;
    const auto corpus = synth_corpus(n, words, corpus_seed);
    TrainResult r = train(model, corpus, cfg);
    const double final_cer = evaluate(r.model, corpus);
    py::gil_scoped_acquire acquire;
    py::list log;
    for (const auto& e : r.log) log.append(json_dict(to_json(e)));
    return py::make_tuple(r.model, log, final_cer);
  }, py::arg("model"), py::arg("n") = 20, py::arg("words_per_utterance") = 3, py::arg("corpus_seed") = 7,
     py::arg("epochs") = 30, py::arg("learning_rate") = 1e-3, py::arg("seed") = 7,
     "Trains on a synthetic corpus; returns (model, per-epoch log, final corpus CER).");

  // attack
  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &AttackConfig::iterations)
      .def_readwrite("learning_rate", &AttackConfig::learning_rate)
      .def_readwrite("initial_con", &AttackConfig::initial_con)
      .def_readwrite("con_decay", &AttackConfig::con_decay)
      .def_readwrite("check_every", &AttackConfig::check_every)
      .def_readwrite("loss_weights", &AttackConfig::loss_weights)
      .def_readwrite("l2_weight", &AttackConfig::l2_weight)
      .def_readwrite("seed", &AttackConfig::seed)
      .def_readwrite("clip_bound", &AttackConfig::clip_bound);
  m.def("plan_clip", [](std::size_t audio_len, std::size_t logit_count, std::size_t transcript_len, int step,
                        std::size_t target_len, int lambda, const std::string& position) {
    return json_dict(to_json(plan_clip({audio_len, logit_count, transcript_len, step}, target_len, lambda,
                                       parse_position(position))));
  }, py::arg("audio_len"), py::arg("logit_count"), py::arg("transcript_len"), py::arg("step"), py::arg("target_len"),
     py::arg("lambda_") = 0, py::arg("position") = "begin");
  m.def("attack", [](const AcousticModel& model, py::array_t<double> s, const std::string& phrase, int lambda,
                     const std::string& position, const std::string& suffix, const AttackConfig& cfg, int rate) {
    const Waveform x = to_waveform(s, rate);
    const TargetPhrase t(phrase, parse_suffix(suffix));
    AttackResult r = [&] {
      py::gil_scoped_release release;
      const ClipPlan plan = select_clip(x, t, model, {}, lambda, parse_position(position));
      return run_attack(x, t, model, plan, cfg);
    }();
    return result_dict(r);
  }, py::arg("model"), py::arg("samples"), py::arg("phrase"), py::arg("lambda_") = 0, py::arg("position") = "begin",
     py::arg("suffix") = "spaces", py::arg("config") = AttackConfig{}, py::arg("sample_rate") = kDefaultSampleRate);
  m.def("baseline", [](const AcousticModel& model, py::array_t<double> s, const std::string& phrase,
                       const AttackConfig& cfg, int rate) {
    const Waveform x = to_waveform(s, rate);
    AttackResult r = [&] {
      py::gil_scoped_release release;
      return run_baseline(x, TargetPhrase(phrase), model, cfg);
    }();
    return result_dict(r);
  }, py::arg("model"), py::arg("samples"), py::arg("phrase"), py::arg("config") = AttackConfig{},
     py::arg("sample_rate") = kDefaultSampleRate);

  // eval
  m.def("cer", [](const std::string& t, const std::string& h) {
    const CerReport r = cer(t, h);
    return py::make_tuple(r.edit_distance, r.cer, r.success_rate);
  }, "Returns (edit_distance, cer, success_rate).");
  m.def("phrase_success", [](const std::string& t, const std::string& y) { return phrase_success(t, y).success_rate; });
  m.def("eval_defense", [](py::array_t<double> benign, py::array_t<double> suspicious, const AcousticModel& model,
                           const std::string& phrase, std::vector<std::string> truth, int rate) {
    return json_dict(to_json(eval_defense(to_waveform(benign, rate), to_waveform(suspicious, rate), model, phrase, truth)));
  }, py::arg("benign"), py::arg("suspicious"), py::arg("model"), py::arg("phrase"), py::arg("ground_truth"),
     py::arg("sample_rate") = kDefaultSampleRate);
}
