#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fir/plot.hpp"
#include "fir/store.hpp"

using namespace fir;
using namespace fir::store;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("fir_store_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

Raster random_raster(std::mt19937& rng, int rows, int cols) {
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    Raster m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
}

} // namespace

TEST_CASE("fnv1a_hex") {
    // reference values for the 64-bit FNV-1a parameters
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
    CHECK(fnv1a_hex("foobar") != fnv1a_hex("foobaz"));
}

TEST_CASE("geometry_hash tracks parameters that change the raster") {
    CqtConfig a, b;
    CHECK(geometry_hash(a) == geometry_hash(b));
    b.fmin = 32.7f;
    CHECK(geometry_hash(a) != geometry_hash(b));
    b = a;
    b.magnitude_scale = MagnitudeScale::linear;
    CHECK(geometry_hash(a) != geometry_hash(b));
}

TEST_CASE("segment records round-trip through the store") {
    TempDir dir;
    std::mt19937 rng(1);

    SegmentRecord rec;
    rec.clip_id = "2191";
    rec.segment_index = 3;
    rec.audio.assign(size_t(kSegmentSamples), 0.0f);
    for (auto& s : rec.audio) s = std::uniform_real_distribution<float>(-1, 1)(rng);
    rec.label_roll = Raster::Zero(kFramesPerSegment, kNumInstruments);
    rec.label_roll(10, 2) = 1.0f;
    rec.pitch_roll = Raster::Zero(kFramesPerSegment, kPitchBins);
    rec.pitch_roll(10, 40) = 1.0f;

    write_segment(dir.str(), rec);
    SegmentRecord back = read_segment(dir.str(), "2191", 3);
    CHECK(back.clip_id == rec.clip_id);
    CHECK(back.segment_index == 3);
    REQUIRE(back.audio.size() == rec.audio.size());
    CHECK(back.audio == rec.audio);
    CHECK(back.label_roll == rec.label_roll);
    CHECK(back.pitch_roll == rec.pitch_roll);

    CHECK_THROWS(read_segment(dir.str(), "2191", 4));
    CHECK_THROWS(read_segment(dir.str(), "nope", 0));
}

TEST_CASE("store manifest round-trips and records the config hash") {
    TempDir dir;
    std::vector<StoredClip> clips = {{"1727", Split::train, 66, 8820000L},
                                     {"2303", Split::test, 5, 600000L}};
    write_store_manifest(dir.str(), clips, "deadbeef01234567");
    CHECK(store_exists(dir.str()));

    std::string hash;
    auto back = read_store_manifest(dir.str(), &hash);
    CHECK(hash == "deadbeef01234567");
    REQUIRE(back.size() == 2);
    CHECK(back[0].clip_id == "1727");
    CHECK(back[0].split == Split::train);
    CHECK(back[0].n_segments == 66);
    CHECK(back[0].duration_samples == 8820000L);
    CHECK(back[1].split == Split::test);

    CHECK_FALSE(store_exists((dir.path / "missing").string()));
}

TEST_CASE("cqt config json round-trip") {
    CqtConfig cfg;
    cfg.fmin = 30.0f;
    cfg.magnitude_scale = MagnitudeScale::linear;
    CqtConfig back = cqt_config_from_json(cqt_config_json(cfg));
    CHECK(back.fmin == cfg.fmin);
    CHECK(back.magnitude_scale == cfg.magnitude_scale);
    CHECK(geometry_hash(back) == geometry_hash(cfg));
}

TEST_CASE("feature cache") {
    TempDir dir;
    std::mt19937 rng(2);
    CqtConfig cfg;
    Raster feats = random_raster(rng, kFramesPerSegment, kPitchBins);

    SUBCASE("round-trip is exact") {
        write_features(dir.str(), "clipA", 0, cfg, feats);
        auto back = read_features(dir.str(), "clipA", 0, cfg);
        REQUIRE(back.has_value());
        CHECK(*back == feats);
    }
    SUBCASE("miss on unknown key") {
        CHECK_FALSE(read_features(dir.str(), "clipA", 0, cfg).has_value());
    }
    SUBCASE("config change invalidates the cache") {
        write_features(dir.str(), "clipA", 1, cfg, feats);
        CqtConfig other = cfg;
        other.magnitude_scale = MagnitudeScale::linear;
        CHECK_FALSE(read_features(dir.str(), "clipA", 1, other).has_value());
        CHECK(read_features(dir.str(), "clipA", 1, cfg).has_value());
    }
}

TEST_CASE("checkpoints") {
    TempDir dir;
    std::mt19937 rng(3);
    std::string path = (dir.path / "model.ckpt").string();

    nets::ModelSpec spec{nets::Variant::cqt_hsf, 2, 16};
    nets::Model model(spec, 9);

    Checkpoint ckpt;
    ckpt.spec = spec;
    ckpt.geometry_hash = geometry_hash(CqtConfig{});
    ckpt.model_state = model.state();
    ckpt.optimizer_state.assign(ckpt.model_state.size(), 0.25f);
    ckpt.norm_stats.mean = Eigen::VectorXf::Constant(kPitchBins, 0.5f);
    ckpt.norm_stats.std_dev = Eigen::VectorXf::Constant(kPitchBins, 2.0f);
    ckpt.epoch = 17;
    ckpt.lr = 0.0025f;
    ckpt.config_json = "{\"note\":\"test\"}";
    write_checkpoint(path, ckpt);

    SUBCASE("round-trip restores everything") {
        Checkpoint back = read_checkpoint(path);
        CHECK(back.spec.variant == spec.variant);
        CHECK(back.spec.hsf_n == 2);
        CHECK(back.spec.width == 16);
        CHECK(back.geometry_hash == ckpt.geometry_hash);
        CHECK(back.model_state == ckpt.model_state);
        CHECK(back.optimizer_state == ckpt.optimizer_state);
        CHECK(back.norm_stats.mean == ckpt.norm_stats.mean);
        CHECK(back.norm_stats.std_dev == ckpt.norm_stats.std_dev);
        CHECK(back.epoch == 17);
        CHECK(back.lr == doctest::Approx(0.0025f));
        CHECK(back.config_json == ckpt.config_json);
    }
    SUBCASE("restored state reproduces the model outputs") {
        Checkpoint back = read_checkpoint(path, ckpt.geometry_hash);
        nets::Model fresh(back.spec, 12345); // different init, then overwritten
        fresh.set_state(back.model_state);

        Raster cqt = random_raster(rng, kFramesPerSegment, kPitchBins).cwiseAbs();
        PitchSalience sal;
        sal.data = Raster::Zero(kFramesPerSegment, kPitchBins);
        sal.data(5, 40) = 1.0f;
        Hsf hsf = build_hsf(sal, spec.hsf_n);
        auto in = nets::assemble_input(spec, cqt, &sal, &hsf);
        Raster r1 = nets::predict_roll(model, in);
        Raster r2 = nets::predict_roll(fresh, in);
        CHECK((r1 - r2).cwiseAbs().maxCoeff() == 0.0f);
    }
    SUBCASE("geometry hash mismatch is refused with an explanation") {
        CHECK_THROWS_WITH_AS(read_checkpoint(path, "0000000000000000"),
                             doctest::Contains("geometry"), std::runtime_error);
    }
    SUBCASE("corrupted magic is rejected") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS(read_checkpoint(path));
    }
}

TEST_CASE("render_rolls geometry and cell contents") {
    Raster truth = Raster::Zero(20, kNumInstruments);
    Raster pred = Raster::Zero(20, kNumInstruments);
    truth(4, 1) = 1.0f;
    pred(7, 6) = 1.0f;

    plot::Image img = plot::render_rolls({truth, pred}, 8);
    // two bands of 7 instruments at 8px each, 2px separator rule between
    CHECK(img.width == 20);
    CHECK(img.height == 2 * 7 * 8 + 2);

    // sample centers: active cells black, inactive white
    auto cell = [&](int band, int instrument, int t) {
        int y = band * (7 * 8 + 2) + instrument * 8 + 4;
        return img.at(t, y);
    };
    CHECK(cell(0, 1, 4) == 0);
    CHECK(cell(0, 1, 5) == 255);
    CHECK(cell(0, 6, 7) == 255);
    CHECK(cell(1, 6, 7) == 0);
    CHECK(cell(1, 1, 4) == 255);
    // separator rule row is gray
    CHECK(img.at(0, 7 * 8) != 0);
    CHECK(img.at(0, 7 * 8) != 255);
}

TEST_CASE("write_png emits a decodable grayscale file") {
    TempDir dir;
    std::string path = (dir.path / "roll.png").string();
    plot::Image img;
    img.width = 12;
    img.height = 5;
    img.pixels.assign(size_t(12 * 5), 255);
    img.pixels[0] = 0;
    plot::write_png(path, img);

    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), {});
    REQUIRE(bytes.size() > 45);
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    CHECK(std::equal(sig, sig + 8, bytes.begin()));
    // IHDR: width/height big-endian at offsets 16 and 20, bit depth 8, color type 0
    auto be32 = [&](size_t off) {
        return (uint32_t(bytes[off]) << 24) | (uint32_t(bytes[off + 1]) << 16) |
               (uint32_t(bytes[off + 2]) << 8) | uint32_t(bytes[off + 3]);
    };
    CHECK(be32(16) == 12);
    CHECK(be32(20) == 5);
    CHECK(bytes[24] == 8);
    CHECK(bytes[25] == 0);
    CHECK(std::string(bytes.end() - 8, bytes.end() - 4) == "IEND");
}
