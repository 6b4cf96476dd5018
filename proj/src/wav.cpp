#include "fir/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fir::wav {

namespace {

uint32_t rd_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

} // namespace

AudioBuffer read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("wav: cannot open " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
        std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("wav: not a RIFF/WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t* data = nullptr;
    size_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= raw.size()) {
        const uint8_t* hdr = raw.data() + pos;
        uint32_t len = rd_u32(hdr + 4);
        const uint8_t* body = hdr + 8;
        if (pos + 8 + len > raw.size()) len = uint32_t(raw.size() - pos - 8);
        if (std::memcmp(hdr, "fmt ", 4) == 0 && len >= 16) {
            format = rd_u16(body);
            channels = rd_u16(body + 2);
            rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
            if (format == 0xFFFE && len >= 40) format = rd_u16(body + 24); // WAVE_FORMAT_EXTENSIBLE
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = body;
            data_len = len;
        }
        pos += 8 + len + (len & 1);
    }
    if (!data || channels == 0 || rate == 0)
        throw std::runtime_error("wav: missing fmt/data chunk: " + path);

    const size_t bytes_per = bits / 8;
    if (bytes_per == 0) throw std::runtime_error("wav: bad bit depth");
    const size_t n_frames = data_len / (bytes_per * channels);

    AudioBuffer out;
    out.sample_rate = int(rate);
    out.samples.resize(n_frames);
    for (size_t i = 0; i < n_frames; ++i) {
        double acc = 0;
        for (int c = 0; c < channels; ++c) {
            const uint8_t* s = data + (i * channels + c) * bytes_per;
            double v = 0;
            if (format == 3 && bits == 32) { // IEEE float
                float fv;
                std::memcpy(&fv, s, 4);
                v = fv;
            } else if (format == 1 || format == 0xFFFE || format == 3) {
                switch (bits) {
                    case 8: v = (int(s[0]) - 128) / 128.0; break;
                    case 16: v = int16_t(rd_u16(s)) / 32768.0; break;
                    case 24: {
                        int32_t iv = int32_t(s[0]) | int32_t(s[1]) << 8 | int32_t(s[2]) << 16;
                        if (iv & 0x800000) iv |= ~0xFFFFFF;
                        v = iv / 8388608.0;
                        break;
                    }
                    case 32: v = int32_t(rd_u32(s)) / 2147483648.0; break;
                    default: throw std::runtime_error("wav: unsupported bit depth");
                }
            } else {
                throw std::runtime_error("wav: unsupported format tag");
            }
            acc += v;
        }
        out.samples[i] = float(acc / channels);
    }
    return out;
}

void write(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("wav: cannot write " + path);
    auto w16 = [&](uint16_t v) { f.put(char(v & 0xFF)).put(char(v >> 8)); };
    auto w32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) f.put(char((v >> (8 * i)) & 0xFF));
    };
    uint32_t data_len = uint32_t(samples.size() * 2);
    f.write("RIFF", 4);
    w32(36 + data_len);
    f.write("WAVEfmt ", 8);
    w32(16);
    w16(1); // PCM
    w16(1); // mono
    w32(uint32_t(sample_rate));
    w32(uint32_t(sample_rate) * 2);
    w16(2);
    w16(16);
    f.write("data", 4);
    w32(data_len);
    for (float s : samples) {
        float c = std::max(-1.0f, std::min(1.0f, s));
        w16(uint16_t(int16_t(std::lrint(c * 32767.0f))));
    }
}

std::vector<float> resample(const std::vector<float>& in, int rate_in, int rate_out) {
    if (rate_in == rate_out || in.empty()) return in;
    const double ratio = double(rate_in) / double(rate_out);
    const size_t n_out = size_t(std::llround(double(in.size()) * rate_out / rate_in));
    std::vector<float> out(n_out);
    for (size_t i = 0; i < n_out; ++i) {
        double pos = i * ratio;
        size_t i0 = size_t(pos);
        size_t i1 = std::min(i0 + 1, in.size() - 1);
        double frac = pos - double(i0);
        out[i] = float(in[i0] * (1.0 - frac) + in[i1] * frac);
    }
    return out;
}

AudioBuffer read_as(const std::string& path, int target_rate) {
    AudioBuffer b = read(path);
    b.samples = resample(b.samples, b.sample_rate, target_rate);
    b.sample_rate = target_rate;
    return b;
}

} // namespace fir::wav
