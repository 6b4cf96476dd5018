#include "fir/cqt.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace fir {

void CqtConfig::validate() const {
    if (sample_rate <= 0 || hop <= 0 || n_bins <= 0 || bins_per_octave <= 0 || fmin <= 0)
        throw std::invalid_argument("cqt: all parameters must be positive");
    double fmax = bin_frequency(n_bins - 1);
    if (fmax >= sample_rate / 2.0)
        throw std::invalid_argument("cqt: top bin frequency exceeds Nyquist");
    if (kSegmentSamples / hop < kFramesPerSegment)
        throw std::invalid_argument("cqt: hop does not yield at least 258 frames per segment");
}

double CqtConfig::bin_frequency(int bin) const {
    return fmin * std::pow(2.0, double(bin) / bins_per_octave);
}

namespace {

struct BinKernel {
    std::vector<float> re; // window * cos, pre-normalized
    std::vector<float> im; // window * -sin
};

struct KernelSet {
    CqtConfig cfg;
    std::vector<BinKernel> bins;
};

KernelSet build_kernels(const CqtConfig& cfg) {
    KernelSet ks;
    ks.cfg = cfg;
    const double q = 1.0 / (std::pow(2.0, 1.0 / cfg.bins_per_octave) - 1.0);
    ks.bins.resize(size_t(cfg.n_bins));
    for (int b = 0; b < cfg.n_bins; ++b) {
        const double f = cfg.bin_frequency(b);
        int n = int(std::ceil(q * cfg.sample_rate / f));
        n |= 1; // odd length, symmetric about the frame center
        BinKernel& k = ks.bins[size_t(b)];
        k.re.resize(size_t(n));
        k.im.resize(size_t(n));
        double wsum = 0;
        for (int i = 0; i < n; ++i) {
            double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
            wsum += w;
        }
        for (int i = 0; i < n; ++i) {
            double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
            double phase = 2.0 * M_PI * f * (i - n / 2) / cfg.sample_rate;
            k.re[size_t(i)] = float(w * std::cos(phase) / wsum);
            k.im[size_t(i)] = float(-w * std::sin(phase) / wsum);
        }
    }
    return ks;
}

// Kernels depend only on the config; cache the last few configurations.
const KernelSet& kernels_for(const CqtConfig& cfg) {
    static std::mutex mu;
    static std::vector<KernelSet> cache;
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& ks : cache) {
        const CqtConfig& c = ks.cfg;
        if (c.sample_rate == cfg.sample_rate && c.hop == cfg.hop && c.n_bins == cfg.n_bins &&
            c.bins_per_octave == cfg.bins_per_octave && c.fmin == cfg.fmin)
            return ks;
    }
    cache.push_back(build_kernels(cfg));
    return cache.back();
}

} // namespace

Raster compute_cqt(const std::vector<float>& audio, const CqtConfig& cfg) {
    cfg.validate();
    if (long(audio.size()) != kSegmentSamples)
        throw std::invalid_argument("cqt: expected " + std::to_string(kSegmentSamples) +
                                    " samples, got " + std::to_string(audio.size()));
    for (float s : audio)
        if (!std::isfinite(s)) throw std::invalid_argument("cqt: non-finite sample in input");

    const KernelSet& ks = kernels_for(cfg);
    Raster out(kFramesPerSegment, cfg.n_bins);
    const long len = long(audio.size());
    for (int t = 0; t < kFramesPerSegment; ++t) {
        const long center = long(t) * cfg.hop + cfg.hop / 2;
        for (int b = 0; b < cfg.n_bins; ++b) {
            const BinKernel& k = ks.bins[size_t(b)];
            const int n = int(k.re.size());
            const long start = center - n / 2;
            const long i0 = std::max(0L, -start);
            const long i1 = std::min(long(n), len - start);
            double acc_re = 0, acc_im = 0;
            const float* x = audio.data() + start;
            for (long i = i0; i < i1; ++i) {
                acc_re += double(x[i]) * k.re[size_t(i)];
                acc_im += double(x[i]) * k.im[size_t(i)];
            }
            double mag = std::sqrt(acc_re * acc_re + acc_im * acc_im);
            out(t, b) = cfg.magnitude_scale == MagnitudeScale::log1p ? float(std::log1p(mag))
                                                                     : float(mag);
        }
    }
    return out;
}

NormStats compute_norm_stats(const std::vector<Raster>& training_rasters) {
    if (training_rasters.empty()) throw std::invalid_argument("norm stats: no training rasters");
    const int bins = int(training_rasters.front().cols());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(bins);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(bins);
    long count = 0;
    for (const auto& r : training_rasters) {
        if (int(r.cols()) != bins) throw std::invalid_argument("norm stats: mixed raster widths");
        sum += r.cast<double>().colwise().sum();
        sum_sq += r.cast<double>().array().square().matrix().colwise().sum();
        count += r.rows();
    }
    NormStats st;
    Eigen::VectorXd mean = sum / double(count);
    Eigen::VectorXd var = sum_sq / double(count) - mean.array().square().matrix();
    st.mean = mean.cast<float>();
    st.std_dev = var.array().max(0.0).sqrt().cast<float>();
    return st;
}

namespace {
constexpr float kNormEps = 1e-8f;

void check_stats(const Raster& raster, const NormStats& stats) {
    if (raster.cols() != stats.mean.size() || raster.cols() != stats.std_dev.size())
        throw std::invalid_argument("normalize: stats have " + std::to_string(stats.mean.size()) +
                                    " bins, raster has " + std::to_string(raster.cols()));
}
} // namespace

Raster normalize_features(const Raster& raster, const NormStats& stats) {
    check_stats(raster, stats);
    Raster out = raster;
    for (int c = 0; c < raster.cols(); ++c) {
        float denom = std::max(stats.std_dev[c], kNormEps);
        out.col(c) = (raster.col(c).array() - stats.mean[c]) / denom;
    }
    return out;
}

Raster denormalize_features(const Raster& raster, const NormStats& stats) {
    check_stats(raster, stats);
    Raster out = raster;
    for (int c = 0; c < raster.cols(); ++c) {
        float denom = std::max(stats.std_dev[c], kNormEps);
        out.col(c) = raster.col(c).array() * denom + stats.mean[c];
    }
    return out;
}

} // namespace fir
