#include "fir/store.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace fir::store {

std::string fnv1a_hex(const std::string& data) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string cqt_config_json(const CqtConfig& cfg) {
    json j = {{"sample_rate", cfg.sample_rate}, {"hop", cfg.hop},
              {"n_bins", cfg.n_bins},           {"bins_per_octave", cfg.bins_per_octave},
              {"fmin", cfg.fmin},               {"magnitude_scale", cfg.scale_name()}};
    return j.dump();
}

CqtConfig cqt_config_from_json(const std::string& text) {
    json j = json::parse(text);
    CqtConfig cfg;
    cfg.sample_rate = j.at("sample_rate").get<int>();
    cfg.hop = j.at("hop").get<int>();
    cfg.n_bins = j.at("n_bins").get<int>();
    cfg.bins_per_octave = j.at("bins_per_octave").get<int>();
    cfg.fmin = j.at("fmin").get<double>();
    cfg.magnitude_scale =
        j.at("magnitude_scale").get<std::string>() == "linear" ? MagnitudeScale::linear
                                                               : MagnitudeScale::log1p;
    return cfg;
}

std::string geometry_hash(const CqtConfig& cfg) {
    return fnv1a_hex(cqt_config_json(cfg) + "|" + std::to_string(kSegmentSamples) + "|" +
                     std::to_string(kFramesPerSegment) + "|" + std::to_string(kPitchBins));
}

namespace {

void write_record(const std::string& path, const char magic[8], const json& header,
                  const std::vector<std::pair<const void*, size_t>>& payloads) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("store: cannot write " + path);
    std::string h = header.dump();
    f.write(magic, 8);
    uint32_t len = uint32_t(h.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(h.data(), std::streamsize(h.size()));
    for (const auto& [ptr, n] : payloads) f.write(static_cast<const char*>(ptr), std::streamsize(n));
    if (!f) throw std::runtime_error("store: write failed for " + path);
}

json read_record_header(std::ifstream& f, const char magic[8], const std::string& path) {
    char m[8];
    f.read(m, 8);
    if (!f || std::string(m, 8) != std::string(magic, 8))
        throw std::runtime_error("store: bad magic in " + path);
    uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string h(len, '\0');
    f.read(h.data(), std::streamsize(len));
    if (!f) throw std::runtime_error("store: truncated header in " + path);
    return json::parse(h);
}

constexpr char kSegMagic[8] = {'F', 'I', 'R', 'S', 'E', 'G', '1', '\n'};
constexpr char kFeatMagic[8] = {'F', 'I', 'R', 'F', 'E', 'A', '1', '\n'};
constexpr char kCkptMagic[8] = {'F', 'I', 'R', 'C', 'K', 'P', '1', '\n'};

std::string segment_path(const std::string& dir, const std::string& clip_id, int segment_index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", segment_index);
    return dir + "/" + clip_id + "_" + buf + ".seg";
}

std::vector<uint8_t> roll_to_bytes(const Raster& r) {
    std::vector<uint8_t> out(size_t(r.size()));
    size_t i = 0;
    for (int row = 0; row < r.rows(); ++row)
        for (int col = 0; col < r.cols(); ++col) out[i++] = r(row, col) > 0.5f ? 1 : 0;
    return out;
}

Raster bytes_to_roll(const std::vector<uint8_t>& bytes, int rows, int cols) {
    Raster r(rows, cols);
    size_t i = 0;
    for (int row = 0; row < rows; ++row)
        for (int col = 0; col < cols; ++col) r(row, col) = float(bytes[i++]);
    return r;
}

} // namespace

void write_segment(const std::string& dir, const SegmentRecord& rec) {
    json hdr = {{"version", 1},
                {"clip_id", rec.clip_id},
                {"segment_index", rec.segment_index},
                {"sample_rate", kSampleRate},
                {"audio_samples", rec.audio.size()},
                {"label_shape", {rec.label_roll.rows(), rec.label_roll.cols()}},
                {"pitch_shape", {rec.pitch_roll.rows(), rec.pitch_roll.cols()}}};
    auto label_bytes = roll_to_bytes(rec.label_roll);
    auto pitch_bytes = roll_to_bytes(rec.pitch_roll);
    write_record(segment_path(dir, rec.clip_id, rec.segment_index), kSegMagic, hdr,
                 {{rec.audio.data(), rec.audio.size() * sizeof(float)},
                  {label_bytes.data(), label_bytes.size()},
                  {pitch_bytes.data(), pitch_bytes.size()}});
}

SegmentRecord read_segment(const std::string& dir, const std::string& clip_id, int segment_index) {
    std::string path = segment_path(dir, clip_id, segment_index);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("store: cannot open " + path);
    json hdr = read_record_header(f, kSegMagic, path);
    SegmentRecord rec;
    rec.clip_id = hdr.at("clip_id").get<std::string>();
    rec.segment_index = hdr.at("segment_index").get<int>();
    size_t n_audio = hdr.at("audio_samples").get<size_t>();
    rec.audio.resize(n_audio);
    f.read(reinterpret_cast<char*>(rec.audio.data()), std::streamsize(n_audio * sizeof(float)));
    auto lsh = hdr.at("label_shape");
    auto psh = hdr.at("pitch_shape");
    std::vector<uint8_t> lb(size_t(lsh[0].get<int>()) * lsh[1].get<int>());
    std::vector<uint8_t> pb(size_t(psh[0].get<int>()) * psh[1].get<int>());
    f.read(reinterpret_cast<char*>(lb.data()), std::streamsize(lb.size()));
    f.read(reinterpret_cast<char*>(pb.data()), std::streamsize(pb.size()));
    if (!f) throw std::runtime_error("store: truncated segment in " + path);
    rec.label_roll = bytes_to_roll(lb, lsh[0].get<int>(), lsh[1].get<int>());
    rec.pitch_roll = bytes_to_roll(pb, psh[0].get<int>(), psh[1].get<int>());
    return rec;
}

void write_store_manifest(const std::string& dir, const std::vector<StoredClip>& clips,
                          const std::string& config_hash) {
    fs::create_directories(dir);
    json j;
    j["version"] = 1;
    j["config_hash"] = config_hash;
    j["clips"] = json::array();
    for (const auto& c : clips)
        j["clips"].push_back({{"clip_id", c.clip_id},
                              {"split", c.split == Split::train ? "train" : "test"},
                              {"n_segments", c.n_segments},
                              {"duration_samples", c.duration_samples}});
    std::ofstream f(dir + "/store_manifest.json");
    f << j.dump(2) << "\n";
}

std::vector<StoredClip> read_store_manifest(const std::string& dir, std::string* config_hash) {
    std::ifstream f(dir + "/store_manifest.json");
    if (!f) throw std::runtime_error("store: no manifest in " + dir + " (run ingest first)");
    json j = json::parse(f);
    if (config_hash) *config_hash = j.value("config_hash", "");
    std::vector<StoredClip> out;
    for (const auto& c : j.at("clips"))
        out.push_back({c.at("clip_id").get<std::string>(),
                       c.at("split").get<std::string>() == "train" ? Split::train : Split::test,
                       c.at("n_segments").get<int>(), c.at("duration_samples").get<long>()});
    return out;
}

bool store_exists(const std::string& dir) { return fs::exists(dir + "/store_manifest.json"); }

namespace {
std::string feature_path(const std::string& cache_dir, const std::string& clip_id,
                         int segment_index, const CqtConfig& cfg) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", segment_index);
    return cache_dir + "/" + fnv1a_hex(cqt_config_json(cfg)) + "/" + clip_id + "_" + buf + ".feat";
}
} // namespace

void write_features(const std::string& cache_dir, const std::string& clip_id, int segment_index,
                    const CqtConfig& cfg, const Raster& features) {
    json hdr = {{"version", 1},
                {"clip_id", clip_id},
                {"segment_index", segment_index},
                {"rows", features.rows()},
                {"cols", features.cols()},
                {"config", json::parse(cqt_config_json(cfg))}};
    // row-major payload
    std::vector<float> data(size_t(features.size()));
    size_t i = 0;
    for (int r = 0; r < features.rows(); ++r)
        for (int c = 0; c < features.cols(); ++c) data[i++] = features(r, c);
    write_record(feature_path(cache_dir, clip_id, segment_index, cfg), kFeatMagic, hdr,
                 {{data.data(), data.size() * sizeof(float)}});
}

std::optional<Raster> read_features(const std::string& cache_dir, const std::string& clip_id,
                                    int segment_index, const CqtConfig& cfg) {
    std::string path = feature_path(cache_dir, clip_id, segment_index, cfg);
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    json hdr = read_record_header(f, kFeatMagic, path);
    int rows = hdr.at("rows").get<int>(), cols = hdr.at("cols").get<int>();
    std::vector<float> data(size_t(rows) * size_t(cols));
    f.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
    if (!f) throw std::runtime_error("store: truncated feature record " + path);
    Raster out(rows, cols);
    size_t i = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = data[i++];
    return out;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json hdr = {{"version", 1},
                {"spec", json::parse(ckpt.spec.to_json())},
                {"geometry_hash", ckpt.geometry_hash},
                {"epoch", ckpt.epoch},
                {"lr", ckpt.lr},
                {"model_state_size", ckpt.model_state.size()},
                {"optimizer_state_size", ckpt.optimizer_state.size()},
                {"norm_mean", std::vector<float>(ckpt.norm_stats.mean.begin(), ckpt.norm_stats.mean.end())},
                {"norm_std", std::vector<float>(ckpt.norm_stats.std_dev.begin(), ckpt.norm_stats.std_dev.end())}};
    if (!ckpt.config_json.empty()) hdr["config"] = json::parse(ckpt.config_json);
    write_record(path, kCkptMagic, hdr,
                 {{ckpt.model_state.data(), ckpt.model_state.size() * sizeof(float)},
                  {ckpt.optimizer_state.data(), ckpt.optimizer_state.size() * sizeof(float)}});
}

Checkpoint read_checkpoint(const std::string& path, const std::string& expected_geometry_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    json hdr = read_record_header(f, kCkptMagic, path);
    Checkpoint ckpt;
    ckpt.spec = nets::ModelSpec::from_json(hdr.at("spec").dump());
    ckpt.geometry_hash = hdr.at("geometry_hash").get<std::string>();
    if (!expected_geometry_hash.empty() && ckpt.geometry_hash != expected_geometry_hash)
        throw std::runtime_error(
            "checkpoint: geometry hash mismatch (checkpoint " + ckpt.geometry_hash +
            ", pipeline " + expected_geometry_hash +
            "); the checkpoint was trained under different feature geometry and cannot be used");
    ckpt.epoch = hdr.value("epoch", 0);
    ckpt.lr = hdr.value("lr", 0.0f);
    auto mean = hdr.at("norm_mean").get<std::vector<float>>();
    auto sd = hdr.at("norm_std").get<std::vector<float>>();
    ckpt.norm_stats.mean = Eigen::Map<Eigen::VectorXf>(mean.data(), long(mean.size()));
    ckpt.norm_stats.std_dev = Eigen::Map<Eigen::VectorXf>(sd.data(), long(sd.size()));
    if (hdr.contains("config")) ckpt.config_json = hdr["config"].dump();
    ckpt.model_state.resize(hdr.at("model_state_size").get<size_t>());
    ckpt.optimizer_state.resize(hdr.at("optimizer_state_size").get<size_t>());
    f.read(reinterpret_cast<char*>(ckpt.model_state.data()),
           std::streamsize(ckpt.model_state.size() * sizeof(float)));
    f.read(reinterpret_cast<char*>(ckpt.optimizer_state.data()),
           std::streamsize(ckpt.optimizer_state.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: truncated state in " + path);
    return ckpt;
}

} // namespace fir::store
