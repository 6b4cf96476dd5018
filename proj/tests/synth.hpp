// Synthetic chamber-music clips for tests: each instrument is a fixed
// recipe of harmonic partial amplitudes, so identity is carried by the
// spectral envelope, the same cue the models face on real recordings.
#ifndef FIR_TESTS_SYNTH_HPP
#define FIR_TESTS_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fir/ingest.hpp"

namespace synth {

inline const float kProfiles[7][6] = {
    {1.0f, 0.55f, 0.35f, 0.22f, 0.12f, 0.06f}, // bright, decaying
    {0.7f, 1.0f, 0.75f, 0.55f, 0.40f, 0.28f},  // rich upper partials
    {0.8f, 0.9f, 0.5f, 0.6f, 0.25f, 0.15f},
    {1.0f, 0.5f, 0.7f, 0.25f, 0.35f, 0.10f},
    {1.0f, 0.04f, 0.65f, 0.04f, 0.35f, 0.03f}, // odd harmonics dominate
    {0.45f, 1.0f, 0.30f, 0.65f, 0.18f, 0.08f}, // strong second partial
    {1.0f, 0.30f, 0.10f, 0.05f, 0.02f, 0.01f}, // dark, fundamental-heavy
};

struct SynthClip {
    std::vector<float> audio;
    std::vector<fir::NoteEvent> events;
};

// One independent stream of notes per listed instrument index (0..6).
inline SynthClip make_clip(std::mt19937& rng, double seconds, const std::vector<int>& instruments,
                           const fir::InstrumentCatalog& catalog) {
    SynthClip clip;
    long n_samples = long(seconds * fir::kSampleRate);
    clip.audio.assign(size_t(n_samples), 0.0f);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    for (int instr : instruments) {
        double t = 0.3 * uni(rng);
        while (t < seconds - 0.3) {
            double dur = 0.35 + 0.6 * uni(rng);
            if (t + dur > seconds) dur = seconds - t;
            int midi = 48 + int(rng() % 32);
            double f0 = 440.0 * std::pow(2.0, (midi - 69) / 12.0);
            double gain = 0.35 + 0.4 * uni(rng);
            long on = long(t * fir::kSampleRate), off = long((t + dur) * fir::kSampleRate);
            for (long s = on; s < std::min(off, n_samples); ++s) {
                double tt = double(s - on) / fir::kSampleRate;
                // 10 ms attack/release to avoid clicks
                double env = std::min({1.0, tt / 0.01, (dur - tt) / 0.01});
                if (env < 0) env = 0;
                double v = 0;
                for (int k = 1; k <= 6; ++k)
                    v += kProfiles[instr][k - 1] * std::sin(2.0 * M_PI * k * f0 * tt);
                clip.audio[size_t(s)] += float(gain * env * v / 3.0);
            }
            clip.events.push_back({on, off, midi, catalog.at(instr).code, true});
            t += dur + 0.05 + 0.3 * uni(rng);
        }
    }
    std::normal_distribution<float> noise(0.0f, 0.004f);
    for (auto& s : clip.audio) s += noise(rng);
    return clip;
}

} // namespace synth

#endif
