#ifndef FIR_CQT_HPP
#define FIR_CQT_HPP

#include <string>
#include <vector>

#include "fir/geometry.hpp"

namespace fir {

enum class MagnitudeScale { linear, log1p };

struct CqtConfig {
    int sample_rate = kSampleRate;
    int hop = kHop;
    int n_bins = kPitchBins;
    int bins_per_octave = 12;
    double fmin = 27.5; // A0, aligning bin f with MIDI pitch 21+f
    MagnitudeScale magnitude_scale = MagnitudeScale::log1p;

    void validate() const; // throws std::invalid_argument
    double bin_frequency(int bin) const;
    std::string scale_name() const { return magnitude_scale == MagnitudeScale::log1p ? "log1p" : "linear"; }
};

// Magnitude constant-Q spectrogram of one 3-second segment, 258x88.
// Each bin is an inner product against a Hann-windowed complex exponential
// of frequency-dependent length, evaluated at frame centers t*hop + hop/2,
// window truncated at the segment boundaries.
Raster compute_cqt(const std::vector<float>& audio, const CqtConfig& cfg);

// Per-bin normalization statistics, computed on the training split only.
struct NormStats {
    Eigen::VectorXf mean; // one per frequency bin
    Eigen::VectorXf std_dev;
};

NormStats compute_norm_stats(const std::vector<Raster>& training_rasters);
Raster normalize_features(const Raster& raster, const NormStats& stats);
Raster denormalize_features(const Raster& raster, const NormStats& stats);

} // namespace fir

#endif
