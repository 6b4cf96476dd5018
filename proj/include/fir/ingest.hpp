#ifndef FIR_INGEST_HPP
#define FIR_INGEST_HPP

#include <optional>
#include <string>
#include <vector>

#include "fir/geometry.hpp"

namespace fir {

// One annotated note. Sample indices at 44,100 Hz; offset exclusive.
struct NoteEvent {
    long onset_sample = 0;
    long offset_sample = 0;
    int midi_pitch = 0;
    int instrument_code = 0;
    // Code not in the catalog: the note sounds in the audio but carries no
    // instrument label and is excluded from label rolls.
    bool labeled = true;
};

// Ordered set of recognized instruments. The position of a code in the
// list defines the label-vector index for that instrument.
class InstrumentCatalog {
public:
    struct Entry {
        int code;
        std::string name;
    };

    // MusicNet's MIDI-instrument codes for the seven-instrument subset.
    static InstrumentCatalog musicnet_default();
    static InstrumentCatalog from_json_file(const std::string& path);

    explicit InstrumentCatalog(std::vector<Entry> entries);

    int size() const { return int(entries_.size()); }
    const Entry& at(int index) const { return entries_.at(size_t(index)); }
    // -1 when the code is not in the catalog.
    int index_of(int code) const;
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

enum class Split { train, test };

struct ClipManifest {
    std::string clip_id;
    Split split = Split::train;
    std::string audio_path;
    std::string labels_path;
    long duration_samples = 0;
};

// One 3-second training example.
struct SegmentRecord {
    std::string clip_id;
    int segment_index = 0;
    std::vector<float> audio;       // exactly kSegmentSamples
    Raster label_roll;              // 258 x 7, {0,1}
    Raster pitch_roll;              // 258 x 88, {0,1}
};

// Parses a MusicNet-style delimited label file. Columns are resolved by
// header name (start_time/end_time/instrument/note) when a header row is
// present, positionally otherwise. Rows whose instrument code is not in
// the catalog are kept with labeled=false.
std::vector<NoteEvent> parse_labels(const std::string& labels_path, const InstrumentCatalog& catalog);

// Entry (t, n) = 1 iff some labeled event of instrument n covers the
// center sample of frame t. Events must already be segment-relative.
Raster rasterize_labels(const std::vector<NoteEvent>& events, const InstrumentCatalog& catalog);

// Entry (t, f) = 1 iff some event with pitch bin f covers the center of
// frame t. Pitches outside MIDI 21..108 are dropped (warning on stderr).
Raster rasterize_pitch(const std::vector<NoteEvent>& events);

// Cuts a clip into ceil(len/132300) segments, zero-padding the last, and
// rasterizes the events clipped to each segment's boundaries.
std::vector<SegmentRecord> segment_clip(const std::string& clip_id, const std::vector<float>& audio,
                                        const std::vector<NoteEvent>& events,
                                        const InstrumentCatalog& catalog);

// Scans a dataset root laid out as <root>/train_data/<id>.wav,
// <root>/train_labels/<id>.csv (same for test_*), or reads an explicit
// split manifest (CSV: clip_id,split) against <root>/data + <root>/labels.
std::vector<ClipManifest> scan_dataset(const std::string& root);

} // namespace fir

#endif
