#include "fir/plot.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace fir::plot {

namespace {

uint32_t crc_of(const std::vector<uint8_t>& chunk) {
    return uint32_t(crc32(0, chunk.data(), uInt(chunk.size())));
}

void push_u32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& data) {
    std::vector<uint8_t> out;
    push_u32(out, uint32_t(data.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    push_u32(out, crc_of(body));
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
}

} // namespace

void write_png(const std::string& path, const Image& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != size_t(img.width) * size_t(img.height))
        throw std::invalid_argument("png: inconsistent image dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("png: cannot write " + path);

    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    push_u32(ihdr, uint32_t(img.width));
    push_u32(ihdr, uint32_t(img.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(f, "IHDR", ihdr);

    // filter byte 0 per scanline
    std::vector<uint8_t> raw;
    raw.reserve(size_t(img.height) * (size_t(img.width) + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), img.pixels.begin() + size_t(y) * size_t(img.width),
                   img.pixels.begin() + size_t(y + 1) * size_t(img.width));
    }
    uLongf comp_len = compressBound(uLong(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    comp.resize(comp_len);
    write_chunk(f, "IDAT", comp);
    write_chunk(f, "IEND", {});
}

Image render_rolls(const std::vector<Raster>& rolls, int cell_height) {
    if (rolls.empty()) throw std::invalid_argument("render_rolls: no rolls");
    const int frames = int(rolls[0].rows());
    const int instruments = int(rolls[0].cols());
    for (const auto& r : rolls)
        if (r.rows() != frames || r.cols() != instruments)
            throw std::invalid_argument("render_rolls: roll length mismatch");

    const int rule = 2; // separator between bands
    Image img;
    img.width = frames;
    img.height = int(rolls.size()) * instruments * cell_height + (int(rolls.size()) - 1) * rule;
    img.pixels.assign(size_t(img.width) * size_t(img.height), 255);

    int y0 = 0;
    for (size_t b = 0; b < rolls.size(); ++b) {
        const Raster& roll = rolls[b];
        for (int n = 0; n < instruments; ++n)
            for (int t = 0; t < frames; ++t)
                if (roll(t, n) > 0.5f)
                    for (int dy = 0; dy < cell_height; ++dy) {
                        int y = y0 + n * cell_height + dy;
                        img.pixels[size_t(y) * size_t(img.width) + size_t(t)] = 0;
                    }
        y0 += instruments * cell_height;
        if (b + 1 < rolls.size()) {
            for (int dy = 0; dy < rule; ++dy)
                for (int x = 0; x < img.width; ++x)
                    img.pixels[size_t(y0 + dy) * size_t(img.width) + size_t(x)] = 128;
            y0 += rule;
        }
    }
    return img;
}

} // namespace fir::plot
