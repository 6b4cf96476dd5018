#ifndef FIR_GEOMETRY_HPP
#define FIR_GEOMETRY_HPP

#include <Eigen/Dense>

namespace fir {

// Fixed analysis grid shared by features, pitch rasters and label rolls.
constexpr int kSampleRate = 44100;
constexpr int kHop = 512;
constexpr int kSegmentSeconds = 3;
constexpr int kSegmentSamples = kSampleRate * kSegmentSeconds;  // 132300
constexpr int kFramesPerSegment = kSegmentSamples / kHop;       // 258
constexpr int kPitchBins = 88;
constexpr int kMidiLow = 21;   // A0, bin 0
constexpr int kMidiHigh = 108; // C8, bin 87
constexpr int kNumInstruments = 7;

// Time-by-feature raster on the fixed frame grid. Rows are frames.
using Raster = Eigen::MatrixXf;

// Sample index of the center of frame t within a segment.
inline long frame_center(int t) { return static_cast<long>(t) * kHop + kHop / 2; }

inline int midi_to_bin(int midi) { return midi - kMidiLow; }
inline bool midi_in_range(int midi) { return midi >= kMidiLow && midi <= kMidiHigh; }

} // namespace fir

#endif
