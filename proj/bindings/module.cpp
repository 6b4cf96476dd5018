#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "fir/cqt.hpp"
#include "fir/geometry.hpp"
#include "fir/hsf.hpp"
#include "fir/ingest.hpp"
#include "fir/nets.hpp"
#include "fir/train.hpp"

namespace py = pybind11;
using namespace fir;

namespace {

CqtConfig make_cqt_config(const std::string& scale) {
    CqtConfig cfg;
    if (scale == "linear")
        cfg.magnitude_scale = MagnitudeScale::linear;
    else if (scale == "log1p")
        cfg.magnitude_scale = MagnitudeScale::log1p;
    else
        throw std::invalid_argument("magnitude scale must be 'linear' or 'log1p', got '" + scale + "'");
    return cfg;
}

PitchSalience as_salience(const Raster& m) {
    PitchSalience p;
    p.data = m;
    return p;
}

std::vector<NoteEvent> events_from_tuples(
    const std::vector<std::tuple<long, long, int, int>>& rows, const InstrumentCatalog& catalog) {
    std::vector<NoteEvent> events;
    events.reserve(rows.size());
    for (const auto& [onset, offset, code, pitch] : rows) {
        NoteEvent e;
        e.onset_sample = onset;
        e.offset_sample = offset;
        e.instrument_code = code;
        e.midi_pitch = pitch;
        e.labeled = catalog.index_of(code) >= 0;
        events.push_back(e);
    }
    return events;
}

nets::ModelInput assemble(const nets::ModelSpec& spec, const Raster& cqt, const Raster* salience) {
    PitchSalience p0;
    Hsf hsf;
    const PitchSalience* pp = nullptr;
    const Hsf* ph = nullptr;
    if (spec.needs_salience() || spec.needs_hsf()) {
        if (!salience)
            throw std::invalid_argument("variant " + nets::variant_name(spec.variant) +
                                        " requires a pitch salience matrix");
        p0 = as_salience(*salience);
        pp = &p0;
        if (spec.needs_hsf()) {
            hsf = build_hsf(p0, spec.hsf_n);
            ph = &hsf;
        }
    }
    return nets::assemble_input(spec, cqt, pp, ph);
}

train::LossConfig make_loss_config(const Eigen::VectorXf& weights) {
    train::LossConfig loss;
    loss.class_weights = weights;
    return loss;
}

nets::Batch1d to_batch(const std::vector<Eigen::MatrixXf>& mats) { return mats; }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Frame-level multi-instrument recognition core";

    m.attr("SAMPLE_RATE") = kSampleRate;
    m.attr("HOP") = kHop;
    m.attr("FRAMES_PER_SEGMENT") = kFramesPerSegment;
    m.attr("SEGMENT_SAMPLES") = kSegmentSamples;
    m.attr("PITCH_BINS") = kPitchBins;
    m.attr("NUM_INSTRUMENTS") = kNumInstruments;

    m.def("instrument_names", []() {
        auto catalog = InstrumentCatalog::musicnet_default();
        std::vector<std::string> names;
        for (const auto& e : catalog.entries()) names.push_back(e.name);
        return names;
    });

    m.def(
        "compute_cqt",
        [](const std::vector<float>& audio, const std::string& scale) {
            return compute_cqt(audio, make_cqt_config(scale));
        },
        py::arg("audio"), py::arg("scale") = "log1p",
        "Constant-Q magnitude spectrogram of one 3-second segment, (258, 88).");

    m.def("harmonic_shift_bins", &harmonic_shift_bins, py::arg("k"),
          "Semitone offset of harmonic k: round(12 * log2(k)).");

    m.def(
        "harmonic_map",
        [](const Raster& p0, int k) { return harmonic_map(as_salience(p0), k).data; },
        py::arg("salience"), py::arg("k"),
        "Salience shifted up the log-frequency axis to harmonic k.");

    m.def(
        "build_hsf", [](const Raster& p0, int n) { return build_hsf(as_salience(p0), n).data; },
        py::arg("salience"), py::arg("n"),
        "Harmonic series feature: sum of harmonic maps k = 1..n+1, n in 1..5.");

    m.def(
        "rasterize_labels",
        [](const std::vector<std::tuple<long, long, int, int>>& events) {
            auto catalog = InstrumentCatalog::musicnet_default();
            return rasterize_labels(events_from_tuples(events, catalog), catalog);
        },
        py::arg("events"),
        "(258, 7) binary roll from (onset_sample, offset_sample, instrument_code, midi_pitch) "
        "tuples; an instrument sounds at frame t when a note covers the frame-center sample.");

    m.def(
        "rasterize_pitch",
        [](const std::vector<std::tuple<long, long, int, int>>& events) {
            auto catalog = InstrumentCatalog::musicnet_default();
            return rasterize_pitch(events_from_tuples(events, catalog));
        },
        py::arg("events"), "(258, 88) binary pitch roll from the same event tuples.");

    m.def("compute_norm_stats", [](const std::vector<Raster>& rasters) {
        auto stats = compute_norm_stats(rasters);
        return py::make_tuple(stats.mean, stats.std_dev);
    });
    m.def("normalize_features",
          [](const Raster& r, const Eigen::VectorXf& mean, const Eigen::VectorXf& std_dev) {
              NormStats stats;
              stats.mean = mean;
              stats.std_dev = std_dev;
              return normalize_features(r, stats);
          });

    py::class_<nets::ModelSpec>(m, "ModelSpec")
        .def(py::init([](const std::string& variant, int hsf_n, int width) {
                 nets::ModelSpec spec;
                 spec.variant = nets::variant_from_name(variant);
                 spec.hsf_n = hsf_n;
                 spec.width = width;
                 return spec;
             }),
             py::arg("variant") = "resblock1d", py::arg("hsf_n") = 3, py::arg("width") = 128)
        .def_property_readonly("variant",
                               [](const nets::ModelSpec& s) { return nets::variant_name(s.variant); })
        .def_readonly("hsf_n", &nets::ModelSpec::hsf_n)
        .def_readonly("width", &nets::ModelSpec::width)
        .def("input_shape", &nets::ModelSpec::input_shape)
        .def("needs_salience", &nets::ModelSpec::needs_salience)
        .def("needs_hsf", &nets::ModelSpec::needs_hsf)
        .def("to_json", &nets::ModelSpec::to_json);

    py::class_<nets::Model>(m, "Model")
        .def(py::init([](const nets::ModelSpec& spec, uint64_t seed) {
                 return nets::Model(spec, seed);
             }),
             py::arg("spec"), py::arg("seed") = 0)
        .def_property_readonly("spec", &nets::Model::spec)
        .def("num_params", &nets::Model::num_params)
        .def("state", [](const nets::Model& m_) { return m_.state(); })
        .def("set_state", &nets::Model::set_state)
        .def(
            "predict_roll",
            [](nets::Model& model, const Raster& cqt, const std::optional<Raster>& salience) {
                auto input = assemble(model.spec(), cqt, salience ? &*salience : nullptr);
                return nets::predict_roll(model, input);
            },
            py::arg("cqt"), py::arg("salience") = nullptr,
            "Likelihood roll (258, 7) for one normalized feature segment.");

    m.def(
        "weighted_bce",
        [](const std::vector<Eigen::MatrixXf>& logits, const std::vector<Eigen::MatrixXf>& labels,
           const Eigen::VectorXf& class_weights) {
            return train::weighted_bce(to_batch(logits), to_batch(labels),
                                       make_loss_config(class_weights));
        },
        py::arg("logits"), py::arg("labels"), py::arg("class_weights"),
        "Mean weighted binary cross-entropy over (7, 258) logit/label pairs.");

    m.def(
        "compute_class_weights",
        [](const std::vector<Raster>& label_rolls, float cap) {
            return train::compute_class_weights(label_rolls, cap).class_weights;
        },
        py::arg("label_rolls"), py::arg("weight_cap") = 10.0f);

    m.def(
        "tune_thresholds",
        [](const std::vector<Raster>& predictions, const std::vector<Raster>& labels) {
            auto t = train::tune_thresholds(predictions, labels);
            return std::vector<float>(t.theta.begin(), t.theta.end());
        },
        py::arg("predictions"), py::arg("labels"),
        "Per-instrument F1-maximizing thresholds from the 0.01..0.99 grid.");

    m.def(
        "frame_f1",
        [](const std::vector<Raster>& predictions, const std::vector<Raster>& labels,
           const std::vector<float>& thresholds) {
            if (thresholds.size() != size_t(kNumInstruments))
                throw std::invalid_argument("expected 7 thresholds");
            train::ThresholdVector tv;
            std::copy(thresholds.begin(), thresholds.end(), tv.theta.begin());
            auto catalog = InstrumentCatalog::musicnet_default();
            std::vector<std::string> names;
            for (const auto& e : catalog.entries()) names.push_back(e.name);
            auto report = train::frame_f1(predictions, labels, tv, names);
            py::dict out;
            out["macro_f1"] = report.macro_f1;
            py::dict per;
            for (const auto& s : report.per_instrument) {
                py::dict row;
                row["tp"] = s.tp;
                row["fp"] = s.fp;
                row["fn"] = s.fn;
                row["precision"] = s.precision;
                row["recall"] = s.recall;
                row["f1"] = s.f1;
                per[py::str(s.name)] = row;
            }
            out["per_instrument"] = per;
            return out;
        },
        py::arg("predictions"), py::arg("labels"), py::arg("thresholds"),
        "Frame-level per-instrument and macro F1 of thresholded likelihood rolls.");
}
