#ifndef FIR_WAV_HPP
#define FIR_WAV_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fir::wav {

struct AudioBuffer {
    std::vector<float> samples; // mono
    int sample_rate = 0;
};

// Reads a RIFF/WAVE file (PCM 8/16/24/32-bit or IEEE float32), mixes
// channels down to mono. Throws std::runtime_error on malformed input.
AudioBuffer read(const std::string& path);

// Writes mono float samples as 16-bit PCM.
void write(const std::string& path, const std::vector<float>& samples, int sample_rate);

// Linear-interpolation resampler. Identity when rates match.
std::vector<float> resample(const std::vector<float>& in, int rate_in, int rate_out);

// read() followed by resampling to the pipeline rate.
AudioBuffer read_as(const std::string& path, int target_rate);

} // namespace fir::wav

#endif
