#ifndef FIR_HSF_HPP
#define FIR_HSF_HPP

#include <string>

#include "fir/geometry.hpp"

namespace fir {

enum class SalienceSource { ground_truth, external_estimate };

// Per-frame, per-semitone pitch activity. Binary when rasterized from
// ground-truth notes, continuous in [0,1] when loaded from an external
// multi-pitch estimator.
struct PitchSalience {
    Raster data; // 258 x 88
    SalienceSource source = SalienceSource::ground_truth;
};

// Salience shifted up the log-frequency axis to the k-th harmonic.
struct HarmonicMap {
    int order = 1; // harmonic number k >= 1; k=1 is the fundamental
    Raster data;
};

// Harmonic series feature H_n: elementwise sum of the harmonic maps for
// k = 1..n+1. Entries are bounded by n+1 for binary salience.
struct Hsf {
    int n = 1;
    Raster data;
};

// Semitone-bin offset of harmonic k on a 12-bins/octave axis:
// round(12 * log2(k)). k=1 -> 0, k=2 -> 12, k=3 -> 19, ...
int harmonic_shift_bins(int k);

// out(t, f) = p0(t, f - s) with s = harmonic_shift_bins(k); rows shifted
// past the top bin vanish.
HarmonicMap harmonic_map(const PitchSalience& p0, int k);

// n in 1..5.
Hsf build_hsf(const PitchSalience& p0, int n);

// Salience exchange format (one matrix per segment): ASCII magic
// "FIRSAL1\n", little-endian uint32 JSON header length, JSON header with
// clip_id / segment_index / rows / cols / value_range, then rows*cols
// row-major little-endian float32 values.
void save_salience(const std::string& path, const Raster& data, const std::string& clip_id,
                   int segment_index);

// Values are clamped to [0,1]; values outside [-0.01, 1.01] before
// clamping trigger a warning (likely the wrong file). Shape mismatches
// against the fixed 258x88 geometry are errors.
PitchSalience load_external_salience(const std::string& path);

} // namespace fir

#endif
