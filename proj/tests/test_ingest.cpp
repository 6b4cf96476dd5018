#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "fir/ingest.hpp"
#include "fir/wav.hpp"

using namespace fir;

namespace {

const InstrumentCatalog& catalog() {
    static InstrumentCatalog c = InstrumentCatalog::musicnet_default();
    return c;
}

// Brute-force frame predicate: does any matching event cover this frame
// center?
bool covered(const std::vector<NoteEvent>& events, int t, auto&& match) {
    long c = frame_center(t);
    for (const auto& ev : events)
        if (match(ev) && ev.onset_sample <= c && c < ev.offset_sample) return true;
    return false;
}

std::string write_temp(const std::string& content) {
    std::string path = "test_labels_tmp.csv";
    std::ofstream f(path);
    f << content;
    return path;
}

} // namespace

TEST_CASE("catalog fixes the seven-instrument order") {
    const auto& c = catalog();
    CHECK(c.size() == 7);
    CHECK(c.at(0).name == "Piano");
    CHECK(c.at(1).name == "Violin");
    CHECK(c.at(2).name == "Viola");
    CHECK(c.at(3).name == "Cello");
    CHECK(c.at(4).name == "Clarinet");
    CHECK(c.at(5).name == "Bassoon");
    CHECK(c.at(6).name == "Horn");
    CHECK(c.index_of(1) == 0);
    CHECK(c.index_of(999) == -1);
}

TEST_CASE("parse_labels") {
    SUBCASE("plain row maps fields directly") {
        auto path = write_temp("44100,88200,1,60\n");
        auto evs = parse_labels(path, catalog());
        REQUIRE(evs.size() == 1);
        CHECK(evs[0].onset_sample == 44100);
        CHECK(evs[0].offset_sample == 88200);
        CHECK(evs[0].instrument_code == 1);
        CHECK(evs[0].midi_pitch == 60);
        CHECK(evs[0].labeled);
        std::remove(path.c_str());
    }
    SUBCASE("MusicNet header row resolves columns by name") {
        auto path = write_temp(
            "start_time,end_time,instrument,note,start_beat,end_beat,note_value\n"
            "1000,2000,41,69,0,1,Quarter\n");
        auto evs = parse_labels(path, catalog());
        REQUIRE(evs.size() == 1);
        CHECK(evs[0].instrument_code == 41);
        CHECK(evs[0].midi_pitch == 69);
        std::remove(path.c_str());
    }
    SUBCASE("empty file is an empty list") {
        auto path = write_temp("");
        CHECK(parse_labels(path, catalog()).empty());
        std::remove(path.c_str());
    }
    SUBCASE("instrument outside the catalog is kept but unlabeled") {
        auto path = write_temp("0,1000,7,60\n"); // harpsichord: in MusicNet, not in the 7
        auto evs = parse_labels(path, catalog());
        REQUIRE(evs.size() == 1);
        CHECK_FALSE(evs[0].labeled);
        CHECK(rasterize_labels(evs, catalog()).isZero());
        std::remove(path.c_str());
    }
    SUBCASE("malformed row names the row number") {
        auto path = write_temp("0,1000,1,60\nnot,a,row\n");
        CHECK_THROWS_WITH_AS(parse_labels(path, catalog()), doctest::Contains("row 2"),
                             std::runtime_error);
        std::remove(path.c_str());
    }
    SUBCASE("missing file") {
        CHECK_THROWS(parse_labels("no_such_file.csv", catalog()));
    }
}

TEST_CASE("rasterize_labels") {
    SUBCASE("no events -> zero raster of shape 258x7") {
        Raster r = rasterize_labels({}, catalog());
        CHECK(r.rows() == 258);
        CHECK(r.cols() == 7);
        CHECK(r.isZero());
    }
    SUBCASE("full-segment piano note fills the piano column") {
        NoteEvent ev{0, kSegmentSamples, 60, 1};
        Raster r = rasterize_labels({ev}, catalog());
        CHECK(r.col(0).sum() == float(kFramesPerSegment));
        CHECK(r.rightCols(6).isZero());
    }
    SUBCASE("note over samples [0,1024) covers frames 0 and 1 only") {
        NoteEvent ev{0, 1024, 60, 1};
        Raster r = rasterize_labels({ev}, catalog());
        CHECK(r(0, 0) == 1.0f); // center 256
        CHECK(r(1, 0) == 1.0f); // center 768
        CHECK(r(2, 0) == 0.0f); // center 1280
        CHECK(r.col(0).sum() == 2.0f);
    }
}

TEST_CASE("rasterize_pitch bin mapping") {
    SUBCASE("MIDI endpoints map to bins 0 and 87") {
        NoteEvent lo{0, kSegmentSamples, 21, 1};
        NoteEvent hi{0, kSegmentSamples, 108, 1};
        Raster r = rasterize_pitch({lo, hi});
        CHECK(r.col(0).sum() == float(kFramesPerSegment));
        CHECK(r.col(87).sum() == float(kFramesPerSegment));
    }
    SUBCASE("MIDI 60 lands in bin 39") {
        NoteEvent ev{0, kSegmentSamples, 60, 1};
        Raster r = rasterize_pitch({ev});
        CHECK(r.col(39).sum() == float(kFramesPerSegment));
        CHECK(r.sum() == float(kFramesPerSegment));
    }
    SUBCASE("simultaneous notes set both bins") {
        NoteEvent a{0, 2048, 60, 1};
        NoteEvent b{0, 2048, 64, 41};
        Raster r = rasterize_pitch({a, b});
        for (int t = 0; t < 4; ++t) {
            CHECK(r(t, 39) == 1.0f);
            CHECK(r(t, 43) == 1.0f);
        }
    }
    SUBCASE("out-of-range pitch dropped from pitch roll but kept in labels") {
        NoteEvent ev{0, kSegmentSamples, 115, 1};
        CHECK(rasterize_pitch({ev}).isZero());
        CHECK(rasterize_labels({ev}, catalog()).col(0).sum() == float(kFramesPerSegment));
    }
}

TEST_CASE("rasterization matches the brute-force frame-center oracle") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<long> onset(0, kSegmentSamples - 1);
    std::uniform_int_distribution<long> dur(1, kSegmentSamples / 2);
    std::uniform_int_distribution<int> pitch(15, 115);
    const int codes[] = {1, 41, 42, 43, 72, 71, 69, 7}; // last one uncataloged

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<NoteEvent> events;
        int n_events = int(rng() % 12);
        for (int i = 0; i < n_events; ++i) {
            NoteEvent ev;
            ev.onset_sample = onset(rng);
            ev.offset_sample = std::min<long>(kSegmentSamples, ev.onset_sample + dur(rng));
            if (ev.offset_sample == ev.onset_sample) ev.offset_sample++;
            ev.midi_pitch = pitch(rng);
            ev.instrument_code = codes[rng() % 8];
            ev.labeled = catalog().index_of(ev.instrument_code) >= 0;
            events.push_back(ev);
        }
        Raster labels = rasterize_labels(events, catalog());
        Raster pitches = rasterize_pitch(events);
        for (int t = 0; t < kFramesPerSegment; ++t) {
            for (int n = 0; n < 7; ++n) {
                bool expect = covered(events, t, [&](const NoteEvent& e) {
                    return e.labeled && catalog().index_of(e.instrument_code) == n;
                });
                CHECK(labels(t, n) == (expect ? 1.0f : 0.0f));
            }
            for (int f = 0; f < kPitchBins; ++f) {
                bool expect = covered(events, t, [&](const NoteEvent& e) {
                    return midi_in_range(e.midi_pitch) && midi_to_bin(e.midi_pitch) == f;
                });
                CHECK(pitches(t, f) == (expect ? 1.0f : 0.0f));
            }
        }
    }
}

TEST_CASE("segment_clip") {
    SUBCASE("7 s clip -> 3 segments, 2 s of zeros appended") {
        std::vector<float> audio(size_t(7) * kSampleRate, 0.5f);
        auto segs = segment_clip("c", audio, {}, catalog());
        REQUIRE(segs.size() == 3);
        for (const auto& s : segs) CHECK(s.audio.size() == size_t(kSegmentSamples));
        // last second of data then 2 s of padding
        CHECK(segs[2].audio[size_t(kSampleRate) - 1] == 0.5f);
        CHECK(segs[2].audio[size_t(kSampleRate)] == 0.0f);
        CHECK(segs[2].audio.back() == 0.0f);
    }
    SUBCASE("exactly 6 s -> 2 segments, no padding") {
        std::vector<float> audio(size_t(6) * kSampleRate, 0.25f);
        auto segs = segment_clip("c", audio, {}, catalog());
        REQUIRE(segs.size() == 2);
        CHECK(segs[1].audio.back() == 0.25f);
    }
    SUBCASE("zero-length audio is an error") {
        CHECK_THROWS(segment_clip("c", {}, {}, catalog()));
    }
    SUBCASE("segment count is ceil(len / 132300)") {
        std::mt19937 rng(3);
        for (int trial = 0; trial < 10; ++trial) {
            size_t len = 1 + rng() % size_t(10 * kSampleRate);
            std::vector<float> audio(len, 0.1f);
            auto segs = segment_clip("c", audio, {}, catalog());
            CHECK(segs.size() == (len + kSegmentSamples - 1) / kSegmentSamples);
        }
    }
    SUBCASE("concatenating segments and trimming padding reproduces input") {
        std::mt19937 rng(17);
        std::uniform_real_distribution<float> u(-1.0f, 1.0f);
        std::vector<float> audio(200000);
        for (auto& s : audio) s = u(rng);
        auto segs = segment_clip("c", audio, {}, catalog());
        std::vector<float> merged;
        for (const auto& s : segs) merged.insert(merged.end(), s.audio.begin(), s.audio.end());
        merged.resize(audio.size());
        CHECK(merged == audio);
    }
    SUBCASE("note spanning a segment boundary appears in both segments") {
        std::vector<float> audio(size_t(2) * kSegmentSamples, 0.0f);
        NoteEvent ev{130000, 140000, 60, 1};
        auto segs = segment_clip("c", audio, {ev}, catalog());
        REQUIRE(segs.size() == 2);
        // oracle per segment over global frame centers
        for (int t = 0; t < kFramesPerSegment; ++t) {
            long c0 = frame_center(t);
            long c1 = frame_center(t) + kSegmentSamples;
            CHECK(segs[0].label_roll(t, 0) == ((130000 <= c0 && c0 < 140000) ? 1.0f : 0.0f));
            CHECK(segs[1].label_roll(t, 0) == ((130000 <= c1 && c1 < 140000) ? 1.0f : 0.0f));
        }
        CHECK(segs[0].label_roll.col(0).sum() > 0.0f);
        CHECK(segs[1].label_roll.col(0).sum() > 0.0f);
    }
    SUBCASE("label and pitch rasters share time support per event") {
        std::vector<float> audio(size_t(kSegmentSamples), 0.0f);
        NoteEvent ev{5000, 60000, 70, 41};
        auto segs = segment_clip("c", audio, {ev}, catalog());
        CHECK(segs[0].label_roll.col(1) == segs[0].pitch_roll.col(midi_to_bin(70)));
    }
}

TEST_CASE("wav round-trip and resampling") {
    std::vector<float> tone(4410);
    for (size_t i = 0; i < tone.size(); ++i)
        tone[i] = 0.5f * std::sin(2.0 * M_PI * 440.0 * double(i) / 44100.0);
    wav::write("test_tone.wav", tone, 44100);
    auto back = wav::read("test_tone.wav");
    REQUIRE(back.sample_rate == 44100);
    REQUIRE(back.samples.size() == tone.size());
    float max_err = 0;
    for (size_t i = 0; i < tone.size(); ++i)
        max_err = std::max(max_err, std::abs(back.samples[i] - tone[i]));
    CHECK(max_err < 1.0f / 16384.0f); // 16-bit quantization
    std::remove("test_tone.wav");

    SUBCASE("resample changes length proportionally") {
        auto down = wav::resample(tone, 44100, 22050);
        CHECK(down.size() == tone.size() / 2);
        auto same = wav::resample(tone, 44100, 44100);
        CHECK(same == tone);
    }
    SUBCASE("non-audio file is a decode error") {
        std::ofstream f("test_not_audio.bin", std::ios::binary);
        f << "this is not a wav file at all, definitely not";
        f.close();
        CHECK_THROWS(wav::read("test_not_audio.bin"));
        std::remove("test_not_audio.bin");
    }
}
