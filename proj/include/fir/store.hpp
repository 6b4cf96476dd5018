#ifndef FIR_STORE_HPP
#define FIR_STORE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fir/cqt.hpp"
#include "fir/ingest.hpp"
#include "fir/nets.hpp"

namespace fir::store {

// FNV-1a 64-bit content hash, hex-encoded. Used for config/geometry
// provenance fields in every on-disk artifact.
std::string fnv1a_hex(const std::string& data);

// Hash of everything that fixes raster geometry: CQT parameters plus the
// frame grid constants. Checkpoints refuse to load across a mismatch.
std::string geometry_hash(const CqtConfig& cfg);

// --- Segment store --------------------------------------------------------
// Directory of one binary record per segment ("FIRSEG1\n" magic, JSON
// header, raw payload) plus store_manifest.json with per-clip counts.

struct StoreSummary {
    int train_clips = 0, test_clips = 0;
    int train_segments = 0, test_segments = 0;
};

struct StoredClip {
    std::string clip_id;
    Split split;
    int n_segments;
    long duration_samples;
};

void write_segment(const std::string& dir, const SegmentRecord& rec);
SegmentRecord read_segment(const std::string& dir, const std::string& clip_id, int segment_index);

void write_store_manifest(const std::string& dir, const std::vector<StoredClip>& clips,
                          const std::string& config_hash);
std::vector<StoredClip> read_store_manifest(const std::string& dir, std::string* config_hash = nullptr);
bool store_exists(const std::string& dir);

// --- Feature cache ---------------------------------------------------------
// CQT rasters keyed by (clip_id, segment_index, config hash); the config
// is serialized into the record so caches invalidate on parameter change.

std::string cqt_config_json(const CqtConfig& cfg);
CqtConfig cqt_config_from_json(const std::string& text);

void write_features(const std::string& cache_dir, const std::string& clip_id, int segment_index,
                    const CqtConfig& cfg, const Raster& features);
std::optional<Raster> read_features(const std::string& cache_dir, const std::string& clip_id,
                                    int segment_index, const CqtConfig& cfg);

// --- Checkpoints -----------------------------------------------------------

struct Checkpoint {
    nets::ModelSpec spec;
    std::string geometry_hash;
    std::vector<float> model_state;
    std::vector<float> optimizer_state; // momentum buffers; empty for inference-only
    NormStats norm_stats;
    int epoch = 0;
    float lr = 0;
    std::string config_json; // full pipeline config, provenance
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
// expected_geometry_hash non-empty: refuse (throw) on mismatch.
Checkpoint read_checkpoint(const std::string& path, const std::string& expected_geometry_hash = "");

} // namespace fir::store

#endif
