#include "fir/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace fs = std::filesystem;

namespace fir {

InstrumentCatalog InstrumentCatalog::musicnet_default() {
    return InstrumentCatalog({{1, "Piano"},
                              {41, "Violin"},
                              {42, "Viola"},
                              {43, "Cello"},
                              {72, "Clarinet"},
                              {71, "Bassoon"},
                              {69, "Horn"}});
}

InstrumentCatalog::InstrumentCatalog(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.size() != size_t(kNumInstruments))
        throw std::invalid_argument("catalog must have exactly 7 entries, got " +
                                    std::to_string(entries_.size()));
    for (size_t i = 0; i < entries_.size(); ++i)
        for (size_t j = i + 1; j < entries_.size(); ++j)
            if (entries_[i].name == entries_[j].name || entries_[i].code == entries_[j].code)
                throw std::invalid_argument("catalog entries must be unique");
}

InstrumentCatalog InstrumentCatalog::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("catalog: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    std::vector<Entry> entries;
    for (const auto& item : j.at("instruments"))
        entries.push_back({item.at("code").get<int>(), item.at("name").get<std::string>()});
    return InstrumentCatalog(std::move(entries));
}

int InstrumentCatalog::index_of(int code) const {
    for (size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].code == code) return int(i);
    return -1;
}

namespace {

std::vector<std::string> split_row(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(cell);
    return out;
}

bool looks_numeric(const std::string& s) {
    for (char c : s)
        if (!std::isdigit(uint8_t(c)) && c != '.' && c != '-' && c != '+' && c != 'e' && c != 'E' &&
            !std::isspace(uint8_t(c)))
            return false;
    return !s.empty();
}

} // namespace

std::vector<NoteEvent> parse_labels(const std::string& labels_path, const InstrumentCatalog& catalog) {
    std::ifstream f(labels_path);
    if (!f) throw std::runtime_error("labels: cannot open " + labels_path);

    std::string line;
    std::vector<NoteEvent> events;
    int row = 0;
    // Column order of the MusicNet CSV distribution.
    int col_onset = 0, col_offset = 1, col_instr = 2, col_pitch = 3;
    bool header_done = false;

    while (std::getline(f, line)) {
        ++row;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        char delim = line.find(',') != std::string::npos ? ',' : '\t';
        auto cells = split_row(line, delim);

        if (!header_done) {
            header_done = true;
            if (!cells.empty() && !looks_numeric(cells[0])) {
                for (size_t i = 0; i < cells.size(); ++i) {
                    std::string name = cells[i];
                    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
                    if (name == "start_time" || name == "onset") col_onset = int(i);
                    else if (name == "end_time" || name == "offset") col_offset = int(i);
                    else if (name == "instrument") col_instr = int(i);
                    else if (name == "note" || name == "pitch") col_pitch = int(i);
                }
                continue; // header row consumed
            }
        }

        int max_col = std::max({col_onset, col_offset, col_instr, col_pitch});
        if (int(cells.size()) <= max_col)
            throw std::runtime_error("labels: malformed row " + std::to_string(row) + " in " +
                                     labels_path + " (expected >= " + std::to_string(max_col + 1) +
                                     " columns)");
        NoteEvent ev;
        try {
            ev.onset_sample = std::lround(std::stod(cells[size_t(col_onset)]));
            ev.offset_sample = std::lround(std::stod(cells[size_t(col_offset)]));
            ev.instrument_code = std::stoi(cells[size_t(col_instr)]);
            ev.midi_pitch = std::stoi(cells[size_t(col_pitch)]);
        } catch (const std::exception&) {
            throw std::runtime_error("labels: malformed row " + std::to_string(row) + " in " +
                                     labels_path);
        }
        if (ev.onset_sample < 0 || ev.offset_sample <= ev.onset_sample)
            throw std::runtime_error("labels: bad onset/offset at row " + std::to_string(row) +
                                     " in " + labels_path);
        ev.labeled = catalog.index_of(ev.instrument_code) >= 0;
        events.push_back(ev);
    }
    return events;
}

Raster rasterize_labels(const std::vector<NoteEvent>& events, const InstrumentCatalog& catalog) {
    Raster roll = Raster::Zero(kFramesPerSegment, kNumInstruments);
    for (const auto& ev : events) {
        if (!ev.labeled) continue;
        int n = catalog.index_of(ev.instrument_code);
        if (n < 0) continue;
        for (int t = 0; t < kFramesPerSegment; ++t) {
            long c = frame_center(t);
            if (ev.onset_sample <= c && c < ev.offset_sample) roll(t, n) = 1.0f;
        }
    }
    return roll;
}

Raster rasterize_pitch(const std::vector<NoteEvent>& events) {
    Raster roll = Raster::Zero(kFramesPerSegment, kPitchBins);
    for (const auto& ev : events) {
        if (!midi_in_range(ev.midi_pitch)) {
            std::cerr << "warning: pitch " << ev.midi_pitch << " outside MIDI " << kMidiLow << ".."
                      << kMidiHigh << ", dropped from pitch roll\n";
            continue;
        }
        int bin = midi_to_bin(ev.midi_pitch);
        for (int t = 0; t < kFramesPerSegment; ++t) {
            long c = frame_center(t);
            if (ev.onset_sample <= c && c < ev.offset_sample) roll(t, bin) = 1.0f;
        }
    }
    return roll;
}

std::vector<SegmentRecord> segment_clip(const std::string& clip_id, const std::vector<float>& audio,
                                        const std::vector<NoteEvent>& events,
                                        const InstrumentCatalog& catalog) {
    if (audio.empty()) throw std::invalid_argument("segment_clip: zero-length audio for " + clip_id);
    const long len = long(audio.size());
    const int n_segments = int((len + kSegmentSamples - 1) / kSegmentSamples);

    std::vector<SegmentRecord> out;
    out.reserve(size_t(n_segments));
    for (int s = 0; s < n_segments; ++s) {
        const long begin = long(s) * kSegmentSamples;
        const long end = begin + kSegmentSamples;

        SegmentRecord rec;
        rec.clip_id = clip_id;
        rec.segment_index = s;
        rec.audio.assign(size_t(kSegmentSamples), 0.0f);
        const long copy_end = std::min(end, len);
        std::copy(audio.begin() + begin, audio.begin() + copy_end, rec.audio.begin());

        // Clip events to this segment, re-based to segment-local samples.
        std::vector<NoteEvent> local;
        for (const auto& ev : events) {
            if (ev.offset_sample <= begin || ev.onset_sample >= end) continue;
            NoteEvent e = ev;
            e.onset_sample = std::max(ev.onset_sample, begin) - begin;
            e.offset_sample = std::min(ev.offset_sample, end) - begin;
            local.push_back(e);
        }
        rec.label_roll = rasterize_labels(local, catalog);
        rec.pitch_roll = rasterize_pitch(local);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ClipManifest> scan_dataset(const std::string& root) {
    std::vector<ClipManifest> out;
    std::vector<std::string> missing;

    auto scan_pair = [&](const std::string& data_dir, const std::string& label_dir, Split split) {
        if (!fs::is_directory(data_dir)) return false;
        std::vector<fs::path> wavs;
        for (const auto& e : fs::directory_iterator(data_dir))
            if (e.path().extension() == ".wav") wavs.push_back(e.path());
        std::sort(wavs.begin(), wavs.end());
        for (const auto& w : wavs) {
            ClipManifest m;
            m.clip_id = w.stem().string();
            m.split = split;
            m.audio_path = w.string();
            m.labels_path = (fs::path(label_dir) / (m.clip_id + ".csv")).string();
            if (!fs::exists(m.labels_path)) {
                missing.push_back(m.labels_path);
                continue;
            }
            out.push_back(m);
        }
        return true;
    };

    bool any = false;
    any |= scan_pair(root + "/train_data", root + "/train_labels", Split::train);
    any |= scan_pair(root + "/test_data", root + "/test_labels", Split::test);

    if (!any) {
        // Manifest layout: one clip list, explicit split column.
        const std::string manifest = root + "/split.csv";
        if (!fs::exists(manifest))
            throw std::runtime_error(
                "dataset root " + root +
                " has neither train_data/+train_labels/+test_data/+test_labels/ nor "
                "split.csv + data/ + labels/");
        std::ifstream f(manifest);
        std::string line;
        while (std::getline(f, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            if (line.empty() || line.rfind("clip_id", 0) == 0) continue;
            auto cells = split_row(line, ',');
            if (cells.size() < 2) throw std::runtime_error("split.csv: malformed line: " + line);
            ClipManifest m;
            m.clip_id = cells[0];
            if (cells[1] == "train") m.split = Split::train;
            else if (cells[1] == "test") m.split = Split::test;
            else throw std::runtime_error("split.csv: unknown split '" + cells[1] + "'");
            m.audio_path = root + "/data/" + m.clip_id + ".wav";
            m.labels_path = root + "/labels/" + m.clip_id + ".csv";
            if (!fs::exists(m.audio_path)) missing.push_back(m.audio_path);
            if (!fs::exists(m.labels_path)) missing.push_back(m.labels_path);
            out.push_back(m);
        }
    }

    if (!missing.empty()) {
        std::string msg = "dataset: missing files:";
        for (const auto& p : missing) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }
    if (out.empty()) throw std::runtime_error("dataset: no clips found under " + root);
    return out;
}

} // namespace fir
