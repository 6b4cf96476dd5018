// Command-line pipeline: ingest -> features -> train -> tune-thresholds ->
// eval / predict / plot. One JSON config file plus flag overrides; flags
// win and the effective config is printed before work starts.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fir/cqt.hpp"
#include "fir/hsf.hpp"
#include "fir/ingest.hpp"
#include "fir/nets.hpp"
#include "fir/plot.hpp"
#include "fir/store.hpp"
#include "fir/train.hpp"
#include "fir/wav.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace fir;

namespace {

struct PipelineConfig {
    std::string dataset_root = ".";
    std::string store_dir = "store";
    std::string cache_dir = "cache";
    std::string out_dir = "out";
    std::string catalog_path;  // empty: built-in MusicNet catalog
    std::string salience_dir;  // empty: ground-truth pitch from the store
    CqtConfig cqt;
    nets::ModelSpec model;
    train::TrainConfig training;
    float weight_cap = 10.0f;
};

json config_to_json(const PipelineConfig& c) {
    return {{"dataset_root", c.dataset_root},
            {"store_dir", c.store_dir},
            {"cache_dir", c.cache_dir},
            {"out_dir", c.out_dir},
            {"catalog_path", c.catalog_path},
            {"salience_dir", c.salience_dir},
            {"cqt", json::parse(store::cqt_config_json(c.cqt))},
            {"model", json::parse(c.model.to_json())},
            {"training",
             {{"momentum", c.training.momentum},
              {"initial_lr", c.training.initial_lr},
              {"batch_size", c.training.batch_size},
              {"max_epochs", c.training.max_epochs},
              {"lr_patience", c.training.lr_patience},
              {"seed", c.training.seed},
              {"validation_fraction", c.training.validation_fraction}}},
            {"weight_cap", c.weight_cap}};
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    c.dataset_root = j.value("dataset_root", c.dataset_root);
    c.store_dir = j.value("store_dir", c.store_dir);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.catalog_path = j.value("catalog_path", c.catalog_path);
    c.salience_dir = j.value("salience_dir", c.salience_dir);
    if (j.contains("cqt")) c.cqt = store::cqt_config_from_json(j.at("cqt").dump());
    if (j.contains("model")) c.model = nets::ModelSpec::from_json(j.at("model").dump());
    if (j.contains("training")) {
        const json& t = j.at("training");
        c.training.momentum = t.value("momentum", c.training.momentum);
        c.training.initial_lr = t.value("initial_lr", c.training.initial_lr);
        c.training.batch_size = t.value("batch_size", c.training.batch_size);
        c.training.max_epochs = t.value("max_epochs", c.training.max_epochs);
        c.training.lr_patience = t.value("lr_patience", c.training.lr_patience);
        c.training.seed = t.value("seed", c.training.seed);
        c.training.validation_fraction = t.value("validation_fraction", c.training.validation_fraction);
    }
    c.weight_cap = j.value("weight_cap", c.weight_cap);
    return c;
}

InstrumentCatalog load_catalog(const PipelineConfig& cfg) {
    if (cfg.catalog_path.empty()) return InstrumentCatalog::musicnet_default();
    return InstrumentCatalog::from_json_file(cfg.catalog_path);
}

std::vector<std::string> catalog_names(const InstrumentCatalog& catalog) {
    std::vector<std::string> names;
    for (const auto& e : catalog.entries()) names.push_back(e.name);
    return names;
}

// ---- feature access --------------------------------------------------------

std::string norm_stats_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.cache_dir) / (store::geometry_hash(cfg.cqt) + "_norm.json")).string();
}

void save_norm_stats(const PipelineConfig& cfg, const NormStats& stats) {
    json j = {{"config_hash", store::geometry_hash(cfg.cqt)},
              {"mean", std::vector<float>(stats.mean.data(), stats.mean.data() + stats.mean.size())},
              {"std_dev",
               std::vector<float>(stats.std_dev.data(), stats.std_dev.data() + stats.std_dev.size())}};
    fs::create_directories(cfg.cache_dir);
    std::ofstream(norm_stats_path(cfg)) << j.dump(2) << "\n";
}

std::optional<NormStats> load_norm_stats(const PipelineConfig& cfg) {
    std::ifstream f(norm_stats_path(cfg));
    if (!f.good()) return std::nullopt;
    json j = json::parse(f);
    NormStats stats;
    auto mean = j.at("mean").get<std::vector<float>>();
    auto sd = j.at("std_dev").get<std::vector<float>>();
    stats.mean = Eigen::Map<Eigen::VectorXf>(mean.data(), long(mean.size()));
    stats.std_dev = Eigen::Map<Eigen::VectorXf>(sd.data(), long(sd.size()));
    return stats;
}

Raster features_for(const PipelineConfig& cfg, const SegmentRecord& seg) {
    if (auto cached = store::read_features(cfg.cache_dir, seg.clip_id, seg.segment_index, cfg.cqt))
        return *cached;
    Raster feat = compute_cqt(seg.audio, cfg.cqt);
    store::write_features(cfg.cache_dir, seg.clip_id, seg.segment_index, cfg.cqt, feat);
    return feat;
}

NormStats training_norm_stats(const PipelineConfig& cfg, const std::vector<store::StoredClip>& clips) {
    if (auto stats = load_norm_stats(cfg)) return *stats;
    std::vector<Raster> feats;
    for (const auto& clip : clips) {
        if (clip.split != Split::train) continue;
        for (int s = 0; s < clip.n_segments; ++s)
            feats.push_back(features_for(cfg, store::read_segment(cfg.store_dir, clip.clip_id, s)));
    }
    if (feats.empty()) throw std::runtime_error("no training segments in store; run ingest first");
    NormStats stats = compute_norm_stats(feats);
    save_norm_stats(cfg, stats);
    return stats;
}

PitchSalience salience_for(const PipelineConfig& cfg, const SegmentRecord& seg) {
    if (!cfg.salience_dir.empty()) {
        fs::path p = fs::path(cfg.salience_dir) /
                     (seg.clip_id + "_" + std::to_string(seg.segment_index) + ".sal");
        return load_external_salience(p.string());
    }
    return PitchSalience{seg.pitch_roll, SalienceSource::ground_truth};
}

train::TrainExample make_example(const PipelineConfig& cfg, const SegmentRecord& seg,
                                 const NormStats& stats) {
    train::TrainExample ex;
    ex.clip_id = seg.clip_id;
    ex.label_roll = seg.label_roll;
    Raster feat = normalize_features(features_for(cfg, seg), stats);
    if (cfg.model.needs_hsf()) {
        PitchSalience sal = salience_for(cfg, seg);
        Hsf hsf = build_hsf(sal, cfg.model.hsf_n);
        ex.input = nets::assemble_input(cfg.model, feat, &sal, &hsf);
    } else if (cfg.model.needs_salience()) {
        PitchSalience sal = salience_for(cfg, seg);
        ex.input = nets::assemble_input(cfg.model, feat, &sal, nullptr);
    } else {
        ex.input = nets::assemble_input(cfg.model, feat, nullptr, nullptr);
    }
    return ex;
}

std::vector<train::TrainExample> load_split(const PipelineConfig& cfg, Split split,
                                            const NormStats& stats) {
    std::vector<train::TrainExample> out;
    for (const auto& clip : store::read_store_manifest(cfg.store_dir)) {
        if (clip.split != split) continue;
        for (int s = 0; s < clip.n_segments; ++s)
            out.push_back(make_example(cfg, store::read_segment(cfg.store_dir, clip.clip_id, s), stats));
    }
    return out;
}

// ---- artifacts -------------------------------------------------------------

std::string default_checkpoint_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.out_dir) / (nets::variant_name(cfg.model.variant) + ".ckpt")).string();
}

std::string default_thresholds_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.out_dir) / (nets::variant_name(cfg.model.variant) + "_thresholds.json"))
        .string();
}

void save_thresholds(const std::string& path, const train::ThresholdVector& th,
                     const PipelineConfig& cfg) {
    json j = {{"thresholds", std::vector<float>(th.theta.begin(), th.theta.end())},
              {"config_hash", store::geometry_hash(cfg.cqt)},
              {"config", config_to_json(cfg)}};
    std::ofstream(path) << j.dump(2) << "\n";
}

train::ThresholdVector load_thresholds(const std::string& path) {
    std::ifstream f(path);
    if (!f.good())
        throw std::runtime_error("thresholds file not found: " + path +
                                 "; run the tune-thresholds command first");
    auto v = json::parse(f).at("thresholds").get<std::vector<float>>();
    if (v.size() != size_t(kNumInstruments))
        throw std::runtime_error("thresholds file has " + std::to_string(v.size()) +
                                 " entries, expected " + std::to_string(kNumInstruments));
    train::ThresholdVector th{};
    std::copy(v.begin(), v.end(), th.theta.begin());
    return th;
}

nets::Model load_model(const PipelineConfig& cfg, const std::string& ckpt_path, NormStats& stats_out,
                       nets::ModelSpec& spec_out) {
    store::Checkpoint ckpt = store::read_checkpoint(ckpt_path, store::geometry_hash(cfg.cqt));
    nets::Model model(ckpt.spec);
    model.set_state(ckpt.model_state);
    stats_out = ckpt.norm_stats;
    spec_out = ckpt.spec;
    return model;
}

// Prediction rolls travel in the same container framing as the other
// artifacts: magic, JSON header, row-major float32 payload.
constexpr char kRollMagic[9] = "FIRPRD1\n";

void save_roll(const std::string& path, const Raster& roll, const json& provenance) {
    json header = provenance;
    header["rows"] = roll.rows();
    header["cols"] = roll.cols();
    std::string htext = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw std::runtime_error("cannot write " + path);
    f.write(kRollMagic, 8);
    uint32_t len = uint32_t(htext.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(htext.data(), long(htext.size()));
    for (long t = 0; t < roll.rows(); ++t)
        for (long n = 0; n < roll.cols(); ++n) {
            float v = roll(t, n);
            f.write(reinterpret_cast<const char*>(&v), 4);
        }
}

// ---- subcommands -----------------------------------------------------------

int cmd_ingest(const PipelineConfig& cfg) {
    auto catalog = load_catalog(cfg);
    std::string current_hash = store::geometry_hash(cfg.cqt);
    if (store::store_exists(cfg.store_dir)) {
        std::string stored_hash;
        auto clips = store::read_store_manifest(cfg.store_dir, &stored_hash);
        if (stored_hash == current_hash && !clips.empty()) {
            std::cout << "segment store up to date (" << clips.size() << " clips), nothing to do\n";
            return 0;
        }
    }
    auto manifests = scan_dataset(cfg.dataset_root);
    store::StoreSummary summary;
    std::vector<store::StoredClip> stored;
    for (const auto& m : manifests) {
        wav::AudioBuffer audio = wav::read_as(m.audio_path, kSampleRate);
        auto events = parse_labels(m.labels_path, catalog);
        auto segments = segment_clip(m.clip_id, audio.samples, events, catalog);
        for (const auto& seg : segments) store::write_segment(cfg.store_dir, seg);
        stored.push_back({m.clip_id, m.split, int(segments.size()), long(audio.samples.size())});
        if (m.split == Split::train) {
            ++summary.train_clips;
            summary.train_segments += int(segments.size());
        } else {
            ++summary.test_clips;
            summary.test_segments += int(segments.size());
        }
    }
    store::write_store_manifest(cfg.store_dir, stored, current_hash);
    std::cout << "ingested " << summary.train_clips << " train clips (" << summary.train_segments
              << " segments), " << summary.test_clips << " test clips (" << summary.test_segments
              << " segments)\n";
    return 0;
}

int cmd_features(const PipelineConfig& cfg) {
    auto clips = store::read_store_manifest(cfg.store_dir);
    int n_segments = 0;
    for (const auto& clip : clips) {
        for (int s = 0; s < clip.n_segments; ++s) {
            features_for(cfg, store::read_segment(cfg.store_dir, clip.clip_id, s));
            ++n_segments;
        }
    }
    NormStats stats = training_norm_stats(cfg, clips);
    std::cout << "features ready for " << n_segments << " segments ("
              << store::geometry_hash(cfg.cqt) << "); normalization stats over "
              << stats.mean.size() << " bins\n";
    return 0;
}

int cmd_train(const PipelineConfig& cfg, const std::string& ckpt_path) {
    auto clips = store::read_store_manifest(cfg.store_dir);
    NormStats stats = training_norm_stats(cfg, clips);
    auto all = load_split(cfg, Split::train, stats);

    std::vector<train::TrainExample> train_set, val_set;
    train::split_by_clip(all, cfg.training.validation_fraction, train_set, val_set);
    train::LossConfig loss;
    {
        std::vector<Raster> rolls;
        for (const auto& ex : train_set) rolls.push_back(ex.label_roll);
        loss = train::compute_class_weights(rolls, cfg.weight_cap);
    }

    nets::Model model(cfg.model, cfg.training.seed);
    fs::create_directories(cfg.out_dir);
    std::string log_path =
        (fs::path(cfg.out_dir) / (nets::variant_name(cfg.model.variant) + "_train_log.jsonl")).string();
    std::ofstream log(log_path);
    std::cout << "training " << nets::variant_name(cfg.model.variant) << " ("
              << nets::count_conv_layers(cfg.model) << " conv layers) on " << train_set.size()
              << " segments, validating on " << val_set.size() << "\n";

    auto result = train::train(model, train_set, val_set, cfg.training, loss,
                               [&](const train::EpochLog& l) {
                                   json rec = {{"epoch", l.epoch},
                                               {"train_loss", l.train_loss},
                                               {"val_macro_f1", l.val_macro_f1},
                                               {"lr", l.lr}};
                                   log << rec.dump() << "\n";
                                   log.flush();
                                   std::cout << "epoch " << l.epoch << ": loss " << l.train_loss
                                             << ", val macro F1 " << l.val_macro_f1 << ", lr " << l.lr
                                             << "\n";
                               });
    if (!val_set.empty()) model.set_state(result.best_state);

    store::Checkpoint ckpt;
    ckpt.spec = cfg.model;
    ckpt.geometry_hash = store::geometry_hash(cfg.cqt);
    ckpt.model_state = model.state();
    ckpt.norm_stats = stats;
    ckpt.epoch = val_set.empty() ? cfg.training.max_epochs - 1 : result.best_epoch;
    ckpt.lr = result.log.empty() ? cfg.training.initial_lr : result.log.back().lr;
    ckpt.config_json = config_to_json(cfg).dump();
    store::write_checkpoint(ckpt_path, ckpt);
    std::cout << "checkpoint " << ckpt_path << " (best val macro F1 " << result.best_val_f1
              << " at epoch " << result.best_epoch << "); log " << log_path << "\n";
    return 0;
}

int cmd_tune_thresholds(const PipelineConfig& cfg, const std::string& ckpt_path,
                        const std::string& out_path) {
    NormStats stats;
    nets::ModelSpec spec;
    PipelineConfig eff = cfg;
    nets::Model model = load_model(cfg, ckpt_path, stats, spec);
    eff.model = spec;

    auto train_set = load_split(eff, Split::train, stats);
    if (train_set.empty()) throw std::runtime_error("no training segments in store; run ingest first");
    std::vector<Raster> preds, labels;
    for (const auto& ex : train_set) {
        preds.push_back(nets::predict_roll(model, ex.input));
        labels.push_back(ex.label_roll);
    }
    train::ThresholdVector th = train::tune_thresholds(preds, labels);
    fs::create_directories(cfg.out_dir);
    save_thresholds(out_path, th, eff);
    std::cout << "thresholds";
    for (float t : th.theta) std::cout << " " << t;
    std::cout << " -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& ckpt_path, std::string thresholds_path) {
    NormStats stats;
    nets::ModelSpec spec;
    PipelineConfig eff = cfg;
    nets::Model model = load_model(cfg, ckpt_path, stats, spec);
    eff.model = spec;
    auto catalog = load_catalog(cfg);

    train::ThresholdVector th{};
    if (thresholds_path.empty()) {
        // tune on training predictions when no thresholds file is supplied
        auto train_set = load_split(eff, Split::train, stats);
        if (train_set.empty())
            throw std::runtime_error(
                "no thresholds file and no training segments to tune on; run tune-thresholds first");
        std::vector<Raster> preds, labels;
        for (const auto& ex : train_set) {
            preds.push_back(nets::predict_roll(model, ex.input));
            labels.push_back(ex.label_roll);
        }
        th = train::tune_thresholds(preds, labels);
    } else {
        th = load_thresholds(thresholds_path);
    }

    auto test_set = load_split(eff, Split::test, stats);
    if (test_set.empty()) throw std::runtime_error("no test segments in store");
    std::vector<Raster> preds, labels;
    for (const auto& ex : test_set) {
        preds.push_back(nets::predict_roll(model, ex.input));
        labels.push_back(ex.label_roll);
    }
    auto rep = train::frame_f1(preds, labels, th, catalog_names(catalog));
    rep.config_hash = store::geometry_hash(cfg.cqt);

    // one table row per method, one column per instrument plus the average
    std::cout << "method";
    for (const auto& sc : rep.per_instrument) std::cout << "\t" << sc.name;
    std::cout << "\tAvg.\n" << nets::variant_name(spec.variant);
    for (const auto& sc : rep.per_instrument) std::cout << "\t" << sc.f1;
    std::cout << "\t" << rep.macro_f1 << "\n";

    json per = json::array();
    for (const auto& sc : rep.per_instrument)
        per.push_back({{"name", sc.name},
                       {"tp", sc.tp},
                       {"fp", sc.fp},
                       {"fn", sc.fn},
                       {"precision", sc.precision},
                       {"recall", sc.recall},
                       {"f1", sc.f1}});
    json out = {{"per_instrument", per},
                {"macro_f1", rep.macro_f1},
                {"thresholds", std::vector<float>(th.theta.begin(), th.theta.end())},
                {"config_hash", rep.config_hash},
                {"config", config_to_json(eff)}};
    fs::create_directories(cfg.out_dir);
    std::string out_path =
        (fs::path(cfg.out_dir) / (nets::variant_name(spec.variant) + "_eval.json")).string();
    std::ofstream(out_path) << out.dump(2) << "\n";
    std::cout << "report " << out_path << "\n";
    return 0;
}

int cmd_predict(const PipelineConfig& cfg, const std::string& ckpt_path, const std::string& audio_path,
                const std::string& salience_path, const std::string& out_path) {
    NormStats stats;
    nets::ModelSpec spec;
    nets::Model model = load_model(cfg, ckpt_path, stats, spec);

    wav::AudioBuffer audio = wav::read_as(audio_path, kSampleRate);
    if (audio.samples.empty()) throw std::runtime_error(audio_path + ": no samples decoded");
    auto catalog = load_catalog(cfg);
    auto segments = segment_clip("input", audio.samples, {}, catalog);

    std::vector<PitchSalience> salience;
    if (spec.needs_salience() || spec.needs_hsf()) {
        if (salience_path.empty())
            throw std::runtime_error(
                nets::variant_name(spec.variant) +
                " needs per-segment pitch salience; pass --salience <dir> with one "
                "<name>_<index>.sal file per 3-second segment");
        for (size_t s = 0; s < segments.size(); ++s) {
            fs::path p = fs::path(salience_path);
            fs::path file = p / (p.filename().string() + "_" + std::to_string(s) + ".sal");
            // accept either a directory of files or a single file for one segment
            if (fs::is_directory(p))
                salience.push_back(load_external_salience(file.string()));
            else
                salience.push_back(load_external_salience(salience_path));
        }
    }

    long total_frames = (long(audio.samples.size()) + kHop - 1) / kHop;
    Raster roll(total_frames, kNumInstruments);
    long row = 0;
    for (size_t s = 0; s < segments.size(); ++s) {
        Raster feat = normalize_features(compute_cqt(segments[s].audio, cfg.cqt), stats);
        nets::ModelInput in;
        if (spec.needs_hsf()) {
            Hsf hsf = build_hsf(salience[s], spec.hsf_n);
            in = nets::assemble_input(spec, feat, &salience[s], &hsf);
        } else if (spec.needs_salience()) {
            in = nets::assemble_input(spec, feat, &salience[s], nullptr);
        } else {
            in = nets::assemble_input(spec, feat, nullptr, nullptr);
        }
        Raster seg_roll = nets::predict_roll(model, in);
        long take = std::min(long(kFramesPerSegment), total_frames - row);
        roll.middleRows(row, take) = seg_roll.topRows(take);
        row += take;
    }

    json provenance = {{"audio", audio_path},
                       {"segments", segments.size()},
                       {"config_hash", store::geometry_hash(cfg.cqt)},
                       {"config", config_to_json(cfg)}};
    save_roll(out_path, roll, provenance);
    std::cout << "prediction roll " << roll.rows() << "x" << roll.cols() << " (" << segments.size()
              << " segments) -> " << out_path << "\n";
    return 0;
}

int cmd_plot(const PipelineConfig& cfg, const std::string& ckpt_path,
             const std::string& thresholds_path, std::vector<std::string> clip_ids) {
    NormStats stats;
    nets::ModelSpec spec;
    PipelineConfig eff = cfg;
    nets::Model model = load_model(cfg, ckpt_path, stats, spec);
    eff.model = spec;
    train::ThresholdVector th = load_thresholds(thresholds_path);

    auto clips = store::read_store_manifest(cfg.store_dir);
    if (clip_ids.empty())
        for (const auto& c : clips)
            if (c.split == Split::test) clip_ids.push_back(c.clip_id);
    if (clip_ids.empty()) throw std::runtime_error("no clips to plot");

    fs::create_directories(cfg.out_dir);
    json index = json::array();
    for (const auto& id : clip_ids) {
        const store::StoredClip* clip = nullptr;
        for (const auto& c : clips)
            if (c.clip_id == id) clip = &c;
        if (!clip) throw std::runtime_error("clip not in store: " + id);

        long frames = long(clip->n_segments) * kFramesPerSegment;
        Raster truth(frames, kNumInstruments), pred(frames, kNumInstruments);
        for (int s = 0; s < clip->n_segments; ++s) {
            SegmentRecord seg = store::read_segment(cfg.store_dir, id, s);
            truth.middleRows(long(s) * kFramesPerSegment, kFramesPerSegment) = seg.label_roll;
            Raster p = nets::predict_roll(model, make_example(eff, seg, stats).input);
            for (int t = 0; t < kFramesPerSegment; ++t)
                for (int n = 0; n < kNumInstruments; ++n)
                    pred(long(s) * kFramesPerSegment + t, n) =
                        p(t, n) > th.theta[size_t(n)] ? 1.0f : 0.0f;
        }
        std::string png = (fs::path(cfg.out_dir) / (id + "_rolls.png")).string();
        plot::write_png(png, plot::render_rolls({truth, pred}));
        index.push_back({{"clip_id", id}, {"image", png}, {"frames", frames}});
        std::cout << "plot " << png << "\n";
    }
    std::string index_path = (fs::path(cfg.out_dir) / "plots_index.json").string();
    std::ofstream(index_path) << index.dump(2) << "\n";
    std::cout << "index " << index_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"frame-level multi-instrument recognition pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "pipeline config JSON file");

    // flag overrides; only applied when actually passed
    std::string o_root, o_store, o_cache, o_out, o_variant, o_scale, o_salience_dir, o_catalog;
    int o_hsf_n = 0, o_width = 0, o_epochs = 0, o_batch = 0, o_patience = 0;
    float o_lr = 0, o_momentum = 0, o_valfrac = 0, o_cap = 0;
    uint64_t o_seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--dataset-root", o_root, "dataset root directory");
        sub->add_option("--store-dir", o_store, "segment store directory");
        sub->add_option("--cache-dir", o_cache, "feature cache directory");
        sub->add_option("--out-dir", o_out, "output directory");
        sub->add_option("--catalog", o_catalog, "instrument catalog JSON file");
        sub->add_option("--variant", o_variant,
                        "model variant: baseline2d, resblock1d, cqt_hsf, cqt_pitch_f, cqt_pitch_c");
        sub->add_option("--hsf-n", o_hsf_n, "harmonic series order n (cqt_hsf)");
        sub->add_option("--width", o_width, "residual trunk width");
        sub->add_option("--epochs", o_epochs, "training epochs");
        sub->add_option("--batch-size", o_batch, "minibatch size");
        sub->add_option("--lr", o_lr, "initial learning rate");
        sub->add_option("--momentum", o_momentum, "SGD momentum");
        sub->add_option("--lr-patience", o_patience, "epochs without improvement before halving lr");
        sub->add_option("--validation-fraction", o_valfrac, "clip fraction held out for validation");
        sub->add_option("--weight-cap", o_cap, "positive class weight cap");
        sub->add_option("--seed", o_seed, "RNG seed");
        sub->add_option("--magnitude-scale", o_scale, "spectrogram magnitude scale: linear or log1p");
        sub->add_option("--salience-dir", o_salience_dir, "external pitch salience directory");
    };

    auto* ingest = app.add_subcommand("ingest", "segment the dataset into the store");
    auto* features = app.add_subcommand("features", "precompute spectral features for the store");
    auto* traincmd = app.add_subcommand("train", "train a model variant");
    auto* tune = app.add_subcommand("tune-thresholds", "tune decision thresholds on the training split");
    auto* evalcmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    auto* predict = app.add_subcommand("predict", "run a checkpoint over an audio file");
    auto* plotcmd = app.add_subcommand("plot", "render ground-truth vs predicted rolls");
    for (auto* sub : {ingest, features, traincmd, tune, evalcmd, predict, plotcmd}) add_common(sub);

    std::string ckpt_path, thresholds_path, audio_path, salience_path, roll_out;
    std::vector<std::string> clip_ids;
    for (auto* sub : {traincmd, tune, evalcmd, predict, plotcmd})
        sub->add_option("--checkpoint", ckpt_path, "checkpoint path");
    for (auto* sub : {tune, evalcmd, plotcmd})
        sub->add_option("--thresholds", thresholds_path, "thresholds JSON path");
    predict->add_option("--audio", audio_path, "input audio file")->required();
    predict->add_option("--salience", salience_path, "pitch salience file or directory");
    predict->add_option("--out", roll_out, "prediction roll output path");
    plotcmd->add_option("--clips", clip_ids, "clip ids to render (default: all test clips)");

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f.good()) throw std::runtime_error("cannot read config file: " + config_path);
            cfg = config_from_json(json::parse(f));
        }
        if (const char* env = std::getenv("FIR_CACHE_DIR")) cfg.cache_dir = env;
        auto passed = [&](const std::string& name) { return sub->count(name) > 0; };
        if (passed("--dataset-root")) cfg.dataset_root = o_root;
        if (passed("--store-dir")) cfg.store_dir = o_store;
        if (passed("--cache-dir")) cfg.cache_dir = o_cache;
        if (passed("--out-dir")) cfg.out_dir = o_out;
        if (passed("--catalog")) cfg.catalog_path = o_catalog;
        if (passed("--variant")) cfg.model.variant = nets::variant_from_name(o_variant);
        if (passed("--hsf-n")) cfg.model.hsf_n = o_hsf_n;
        if (passed("--width")) cfg.model.width = o_width;
        if (passed("--epochs")) cfg.training.max_epochs = o_epochs;
        if (passed("--batch-size")) cfg.training.batch_size = o_batch;
        if (passed("--lr")) cfg.training.initial_lr = o_lr;
        if (passed("--momentum")) cfg.training.momentum = o_momentum;
        if (passed("--lr-patience")) cfg.training.lr_patience = o_patience;
        if (passed("--validation-fraction")) cfg.training.validation_fraction = o_valfrac;
        if (passed("--weight-cap")) cfg.weight_cap = o_cap;
        if (passed("--seed")) cfg.training.seed = o_seed;
        if (passed("--salience-dir")) cfg.salience_dir = o_salience_dir;
        if (passed("--magnitude-scale")) {
            if (o_scale == "linear")
                cfg.cqt.magnitude_scale = MagnitudeScale::linear;
            else if (o_scale == "log1p")
                cfg.cqt.magnitude_scale = MagnitudeScale::log1p;
            else
                throw std::runtime_error("unknown magnitude scale: " + o_scale +
                                         " (expected linear or log1p)");
        }
        cfg.cqt.validate();

        std::cout << "effective config: " << config_to_json(cfg).dump() << "\n";
        if (ckpt_path.empty()) ckpt_path = default_checkpoint_path(cfg);
        if (roll_out.empty()) roll_out = (fs::path(cfg.out_dir) / "prediction.roll").string();

        if (sub == ingest) return cmd_ingest(cfg);
        if (sub == features) return cmd_features(cfg);
        if (sub == traincmd) return cmd_train(cfg, ckpt_path);
        if (sub == tune)
            return cmd_tune_thresholds(
                cfg, ckpt_path,
                thresholds_path.empty() ? default_thresholds_path(cfg) : thresholds_path);
        if (sub == evalcmd) return cmd_eval(cfg, ckpt_path, thresholds_path);
        if (sub == predict) return cmd_predict(cfg, ckpt_path, audio_path, salience_path, roll_out);
        if (sub == plotcmd)
            return cmd_plot(cfg, ckpt_path,
                            thresholds_path.empty() ? default_thresholds_path(cfg) : thresholds_path,
                            clip_ids);
        throw std::runtime_error("unhandled subcommand");
    } catch (const std::exception& e) {
        json err = {{"error", e.what()}, {"command", sub->get_name()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
