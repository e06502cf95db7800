#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rtts/evaluation.hpp"
#include "rtts/toy_corpus.hpp"
#include "rtts/trainer.hpp"

namespace py = pybind11;
using namespace rtts;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_doubles(const DoubleArray& a) { return {a.data(), a.data() + a.size()}; }

Waveform to_wave(const FloatArray& samples, int sample_rate) {
  if (samples.ndim() != 1) throw SignalError("expected a 1-D sample array");
  return {{samples.data(), samples.data() + samples.size()}, sample_rate};
}

py::array_t<double> to_numpy(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  py::array_t<double> out(shape);
  std::copy_n(c.data_ptr<double>(), c.numel(), out.mutable_data());
  return out;
}

py::array_t<float> to_numpy(const Waveform& w) {
  py::array_t<float> out(static_cast<py::ssize_t>(w.samples.size()));
  std::copy(w.samples.begin(), w.samples.end(), out.mutable_data());
  return out;
}

torch::Tensor to_tensor(const DoubleArray& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

}  // namespace

PYBIND11_MODULE(_rtts, m) {
  m.doc() = "Reinforce-aligner text-to-waveform toolkit";
  m.attr("SAMPLE_RATE") = kSampleRate;
  m.attr("HOP") = 256;

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<AlignmentError>(m, "AlignmentError", PyExc_ValueError);
  py::register_exception<ObjectiveError>(m, "ObjectiveError", PyExc_ValueError);
  py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_ValueError);
  py::register_exception<SignalError>(m, "SignalError", PyExc_ValueError);
  py::register_exception<AudioError>(m, "AudioError", PyExc_IOError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

  m.def(
      "mel_spectrogram",
      [](const FloatArray& samples, int sample_rate) {
        return to_numpy(mel_spectrogram(to_wave(samples, sample_rate)).frames);
      },
      py::arg("samples"), py::arg("sample_rate") = kSampleRate, "Log-mel frames, shape (T, 80).");

  m.def(
      "alignment_weights",
      [](const DoubleArray& durations, int64_t num_frames, double sigma2) {
        auto d = to_tensor(durations);
        auto scaled = scale_durations(d, static_cast<double>(num_frames));
        auto h = torch::eye(d.size(0), torch::kFloat64);
        return to_numpy(gaussian_upsample(h, scaled.centers, sigma2, num_frames).grid.weights);
      },
      py::arg("durations"), py::arg("num_frames"), py::arg("sigma2") = kDefaultSigma2,
      "Gaussian upsampling weights (T, N) for durations scaled to num_frames.");

  m.def(
      "shift_durations",
      [](const DoubleArray& durations, double alpha, const std::string& mode) {
        auto r = apply_shift(to_tensor(durations), alpha, reward_mode_from_string(mode));
        return py::make_tuple(to_numpy(r.durations), r.clamped);
      },
      py::arg("durations"), py::arg("alpha"), py::arg("mode") = "phoneme_wise",
      "Alternating-sign shift; returns (shifted, number_clamped).");

  m.def(
      "compute_reward",
      [](const DoubleArray& loss_keep, const DoubleArray& loss_shift, const std::string& mode, int64_t num_tokens) {
        auto r = compute_reward(to_doubles(loss_keep), to_doubles(loss_shift), reward_mode_from_string(mode),
                                num_tokens);
        return py::make_tuple(std::vector<int>(r.keep.begin(), r.keep.end()),
                              std::vector<int>(r.shift.begin(), r.shift.end()));
      },
      py::arg("loss_keep"), py::arg("loss_shift"), py::arg("mode"), py::arg("num_tokens"),
      "Per-token (keep, shift) one-hot rewards.");

  m.def(
      "soft_dtw",
      [](const DoubleArray& costs, double omega, double tau, std::optional<int64_t> band) {
        if (costs.ndim() != 2) throw ObjectiveError("soft_dtw: expected a 2-D cost matrix");
        return soft_dtw_from_costs(to_tensor(costs), {omega, tau, band}).item<double>();
      },
      py::arg("costs"), py::arg("omega") = 1.0, py::arg("tau") = 0.01, py::arg("band_width") = py::none());

  m.def("round_durations", [](const DoubleArray& d) { return round_durations(to_doubles(d)); }, py::arg("durations"));

  m.def(
      "duration_error",
      [](const DoubleArray& pred, const std::vector<int64_t>& target) {
        return duration_error(to_doubles(pred), DurationTargets{"", target});
      },
      py::arg("pred"), py::arg("target"));
  m.def(
      "mcd13",
      [](const FloatArray& ref, const FloatArray& syn, int sr) { return mcd13(to_wave(ref, sr), to_wave(syn, sr)); },
      py::arg("reference"), py::arg("synthesized"), py::arg("sample_rate") = kSampleRate);
  m.def(
      "rmse_f0",
      [](const FloatArray& ref, const FloatArray& syn, int sr) { return rmse_f0(to_wave(ref, sr), to_wave(syn, sr)); },
      py::arg("reference"), py::arg("synthesized"), py::arg("sample_rate") = kSampleRate);

  m.def(
      "read_wav", [](const std::filesystem::path& p) { return to_numpy(read_wav(p)); }, py::arg("path"));
  m.def(
      "write_wav",
      [](const std::filesystem::path& p, const FloatArray& samples, int sr) { write_wav(p, to_wave(samples, sr)); },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kSampleRate);

  m.def(
      "write_toy_corpus",
      [](const std::filesystem::path& dir, int64_t utterances, uint64_t seed) {
        ToyCorpusConfig cfg;
        cfg.num_utterances = utterances;
        cfg.seed = seed;
        auto c = write_toy_corpus(dir, cfg);
        return py::dict(py::arg("metadata") = c.metadata, py::arg("wav_dir") = c.wav_dir,
                        py::arg("durations") = c.durations, py::arg("utterance_ids") = c.utterance_ids);
      },
      py::arg("directory"), py::arg("utterances") = 40, py::arg("seed") = 7);

  m.def(
      "train",
      [](const std::string& config_json, const std::filesystem::path& out, const std::filesystem::path& workdir) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::parse_error& e) {
          throw ConfigError(e.what());
        }
        auto cfg = TrainConfig::from_json(j);
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(cfg, out, workdir);
        }
        return py::make_tuple(r.final_checkpoint, r.metrics_log);
      },
      py::arg("config_json"), py::arg("out"), py::arg("workdir") = ".",
      "Trains from a JSON config; returns (final_checkpoint, metrics_log).");

  py::class_<Synthesizer>(m, "Synthesizer")
      .def_static("load", &Synthesizer::load, py::arg("checkpoint"))
      .def(
          "synthesize", [](const Synthesizer& s, const std::string& text) { return to_numpy(s.synthesize(text)); },
          py::arg("text"))
      .def(
          "durations",
          [](const Synthesizer& s, const std::string& text) { return s.run(text).frames_per_token; },
          py::arg("text"))
      .def(
          "alignment",
          [](const Synthesizer& s, const std::string& text) { return to_numpy(s.run(text).alignment.weights); },
          py::arg("text"));
}
