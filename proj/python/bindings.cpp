#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>

#include "painmtl/data.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/eval.hpp"
#include "painmtl/features.hpp"
#include "painmtl/signal.hpp"

namespace py = pybind11;
using namespace painmtl;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Personalized pain recognition from skin conductance and ECG";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<BandEdgeError>(m, "BandEdgeError", base);
  py::register_exception<InvalidSignal>(m, "InvalidSignal", base);
  py::register_exception<SignalTooShort>(m, "SignalTooShort", base);
  py::register_exception<NoBeatsDetected>(m, "NoBeatsDetected", base);
  py::register_exception<WindowTooShort>(m, "WindowTooShort", base);
  py::register_exception<TooFewIntervals>(m, "TooFewIntervals", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<SchemaError>(m, "SchemaError", base);
  py::register_exception<LabelError>(m, "LabelError", base);
  py::register_exception<TooFewSamples>(m, "TooFewSamples", base);
  py::register_exception<FoldError>(m, "FoldError", base);

  m.attr("FEATURE_NAMES") = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());

  m.def(
      "bandpass_filter",
      [](std::vector<double> x, double fs, double low, double high, int order) {
        return to_vector(bandpass_filter(SampledSignal(std::move(x), fs), {low, high, order}).samples());
      },
      py::arg("samples"), py::arg("sample_rate_hz"), py::arg("low_hz") = 0.1, py::arg("high_hz") = 250.0,
      py::arg("order") = 4, "Zero-phase Butterworth bandpass");

  m.def(
      "detect_r_peaks",
      [](std::vector<double> x, double fs) { return detect_r_peaks(SampledSignal(std::move(x), fs)).beat_times_s; },
      py::arg("samples"), py::arg("sample_rate_hz"), "R-peak times in seconds");

  m.def(
      "synthesize_ecg",
      [](double bpm, double duration, double fs, double noise, std::uint64_t seed) {
        auto e = synthesize_ecg(bpm, duration, fs, noise, seed);
        return py::make_tuple(to_vector(e.signal.samples()), e.beats.beat_times_s);
      },
      py::arg("heart_rate_bpm"), py::arg("duration_s") = kWindowDurationS, py::arg("sample_rate_hz") = 512.0,
      py::arg("noise_sd") = 0.0, py::arg("seed") = 0, "Returns (samples, beat_times_s)");

  m.def(
      "sc_features", [](const std::vector<double>& x) { return sc_features(x); }, py::arg("window"),
      "The 12 skin-conductance features");
  m.def(
      "hrv_features", [](const std::vector<double>& ibis) { return hrv_features({ibis}); }, py::arg("intervals_ms"),
      "The 5 HRV features");

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def("subjects", &Dataset::subjects)
      .def("labels",
           [](const Dataset& d) {
             std::vector<std::string> out;
             for (const auto& s : d.samples) out.emplace_back(to_string(s.label));
             return out;
           })
      .def("has_features", [](const Dataset& d) { return d.size() > 0 && d.samples.front().features.has_value(); })
      .def("features",
           [](const Dataset& d) {
             std::vector<std::vector<double>> out;
             for (const auto& s : d.samples)
               out.emplace_back(s.features ? std::vector<double>(s.features->values.begin(), s.features->values.end())
                                           : std::vector<double>{});
             return out;
           })
      .def(
          "save_csv",
          [](const Dataset& d, const std::filesystem::path& path, bool features) {
            std::ofstream out(path);
            if (!out) {
              PyErr_SetString(PyExc_OSError, ("cannot write " + path.string()).c_str());
              throw py::error_already_set();
            }
            features ? save_features_csv(d, out) : save_raw_csv(d, out);
          },
          py::arg("path"), py::arg("features") = false);

  m.def(
      "synthesize_dataset",
      [](std::size_t subjects, std::size_t per_class, double fs, double effect, double heterogeneity, double noise,
         std::uint64_t seed) {
        return synthesize_dataset({subjects, per_class, fs, effect, heterogeneity, noise, seed}).dataset;
      },
      py::arg("n_subjects") = 10, py::arg("per_class") = 20, py::arg("sample_rate_hz") = 512.0,
      py::arg("effect_size") = 1.0, py::arg("subject_heterogeneity") = 0.0, py::arg("noise_sd") = 0.05,
      py::arg("seed") = 0);

  m.def("load_csv", [](const std::filesystem::path& p) { return load_csv(p); }, py::arg("path"));

  m.def(
      "extract_all",
      [](Dataset& d, double low, double high, std::size_t jobs) {
        ExtractionConfig cfg;
        cfg.ecg_band.low_hz = low;
        cfg.ecg_band.high_hz = high;
        py::gil_scoped_release release;
        return extract_all(d, cfg, jobs);
      },
      py::arg("dataset"), py::arg("ecg_low_hz") = 0.1, py::arg("ecg_high_hz") = 250.0, py::arg("jobs") = 1,
      "Fills features in place; returns the number of windows without HRV features");

  m.def(
      "run_experiment",
      [](const Dataset& d, const std::string& classifier, const std::string& feature_set, const std::string& task,
         std::size_t k, std::uint64_t seed, std::size_t epochs, std::size_t jobs) {
        ExperimentSpec s;
        s.classifier = parse_classifier(classifier);
        s.feature_set = parse_feature_set(feature_set);
        s.task = parse_label(task);
        s.k = k;
        s.seed = seed;
        ExperimentOptions o;
        o.nn.max_epochs = epochs;
        o.jobs = jobs;
        CvReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(s, d, o);
        }
        py::list folds;
        for (const auto& f : r.folds) folds.append(f.accuracy);
        py::dict out;
        out["mean_acc"] = r.mean_acc;
        out["std_acc"] = r.std_acc;
        out["folds"] = folds;
        out["invalid_hrv_windows"] = r.invalid_hrv_windows;
        out["cell"] = format_cell(r.mean_acc, r.std_acc);
        return out;
      },
      py::arg("dataset"), py::arg("classifier") = "mtnn", py::arg("feature_set") = "sc+ecg", py::arg("task") = "P4",
      py::arg("k") = 10, py::arg("seed") = ExperimentSpec{}.seed, py::arg("epochs") = TrainConfig{}.max_epochs,
      py::arg("jobs") = 1);

  m.def("format_cell", &format_cell, py::arg("mean"), py::arg("std"));
}
