#include "fir/hsf.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

namespace fir {

int harmonic_shift_bins(int k) {
    if (k < 1) throw std::invalid_argument("harmonic number must be >= 1, got " + std::to_string(k));
    return int(std::lround(12.0 * std::log2(double(k))));
}

HarmonicMap harmonic_map(const PitchSalience& p0, int k) {
    const int shift = harmonic_shift_bins(k);
    const int rows = int(p0.data.rows());
    const int cols = int(p0.data.cols());
    HarmonicMap out;
    out.order = k;
    out.data = Raster::Zero(rows, cols);
    if (shift < cols)
        out.data.rightCols(cols - shift) = p0.data.leftCols(cols - shift);
    return out;
}

Hsf build_hsf(const PitchSalience& p0, int n) {
    if (n < 1 || n > 5) throw std::invalid_argument("HSF order must be in 1..5, got " + std::to_string(n));
    Hsf out;
    out.n = n;
    out.data = Raster::Zero(p0.data.rows(), p0.data.cols());
    for (int k = 1; k <= n + 1; ++k) out.data += harmonic_map(p0, k).data;
    return out;
}

namespace {
constexpr char kSalienceMagic[8] = {'F', 'I', 'R', 'S', 'A', 'L', '1', '\n'};
}

void save_salience(const std::string& path, const Raster& data, const std::string& clip_id,
                   int segment_index) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("salience: cannot write " + path);
    nlohmann::json hdr = {{"clip_id", clip_id},
                          {"segment_index", segment_index},
                          {"rows", data.rows()},
                          {"cols", data.cols()},
                          {"value_range", {data.minCoeff(), data.maxCoeff()}}};
    std::string h = hdr.dump();
    f.write(kSalienceMagic, 8);
    uint32_t len = uint32_t(h.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(h.data(), std::streamsize(h.size()));
    for (int r = 0; r < data.rows(); ++r)
        f.write(reinterpret_cast<const char*>(data.row(r).eval().data()),
                std::streamsize(data.cols() * sizeof(float)));
}

PitchSalience load_external_salience(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("salience: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 8) != std::string(kSalienceMagic, 8))
        throw std::runtime_error("salience: bad magic in " + path);
    uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string h(len, '\0');
    f.read(h.data(), std::streamsize(len));
    if (!f) throw std::runtime_error("salience: truncated header in " + path);
    nlohmann::json hdr = nlohmann::json::parse(h);
    const int rows = hdr.at("rows").get<int>();
    const int cols = hdr.at("cols").get<int>();
    if (rows != kFramesPerSegment || cols != kPitchBins)
        throw std::runtime_error("salience: expected shape 258x88, got " + std::to_string(rows) +
                                 "x" + std::to_string(cols) + " in " + path);

    PitchSalience out;
    out.source = SalienceSource::external_estimate;
    out.data.resize(rows, cols);
    std::vector<float> row(size_t(cols), 0.0f);
    bool suspicious = false;
    for (int r = 0; r < rows; ++r) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(size_t(cols) * sizeof(float)));
        if (!f) throw std::runtime_error("salience: truncated data in " + path);
        for (int c = 0; c < cols; ++c) {
            float v = row[size_t(c)];
            if (v < -0.01f || v > 1.01f) suspicious = true;
            out.data(r, c) = std::min(1.0f, std::max(0.0f, v));
        }
    }
    if (suspicious)
        std::cerr << "warning: salience values outside [-0.01, 1.01] in " << path
                  << " (clamped; check that this is really a salience file)\n";
    return out;
}

} // namespace fir
