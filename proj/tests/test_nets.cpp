#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fir/nets.hpp"
#include "fir/train.hpp"

using namespace fir;
using namespace fir::nets;

namespace {

Raster random_raster(std::mt19937& rng, int rows = kFramesPerSegment, int cols = kPitchBins) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Raster r(rows, cols);
    for (int t = 0; t < rows; ++t)
        for (int f = 0; f < cols; ++f) r(t, f) = u(rng);
    return r;
}

PitchSalience random_salience(std::mt19937& rng) {
    PitchSalience p;
    p.data = Raster::Zero(kFramesPerSegment, kPitchBins);
    for (int t = 0; t < kFramesPerSegment; ++t)
        if (rng() % 4 == 0) p.data(t, int(rng() % kPitchBins)) = 1.0f;
    return p;
}

ModelInput input_for(const ModelSpec& spec, std::mt19937& rng) {
    Raster cqt = random_raster(rng);
    PitchSalience sal = random_salience(rng);
    Hsf hsf = build_hsf(sal, spec.hsf_n);
    return assemble_input(spec, cqt, &sal, &hsf);
}

const std::vector<Variant> kAllVariants = {Variant::baseline2d, Variant::resblock1d,
                                           Variant::cqt_hsf, Variant::cqt_pitch_f,
                                           Variant::cqt_pitch_c};

} // namespace

TEST_CASE("variant names round-trip and bad names list the options") {
    for (Variant v : kAllVariants) CHECK(variant_from_name(variant_name(v)) == v);
    CHECK_THROWS_WITH_AS(variant_from_name("resnet50"), doctest::Contains("baseline2d"),
                         std::invalid_argument);
}

TEST_CASE("conv layer counts") {
    ModelSpec res{Variant::resblock1d};
    CHECK(count_conv_layers(res) == 11);
    ModelSpec hsf{Variant::cqt_hsf, 3};
    CHECK(count_conv_layers(hsf) == 11);
    ModelSpec pf{Variant::cqt_pitch_f};
    CHECK(count_conv_layers(pf) == 11);
    ModelSpec pc{Variant::cqt_pitch_c};
    CHECK(count_conv_layers(pc) == 11);
    ModelSpec base{Variant::baseline2d};
    CHECK(count_conv_layers(base) == 5); // 4 blocks + 1x1 head

    // every conv in the 1D plans is followed by batch norm, except the head
    auto plan = res.layer_plan();
    for (size_t i = 0; i + 1 < plan.size(); ++i)
        if (plan[i].kind == LayerKind::conv1d && plan[i].out_ch != kNumInstruments)
            CHECK(plan[i + 1].kind == LayerKind::batch_norm);
}

TEST_CASE("assemble_input arrangements") {
    std::mt19937 rng(1);
    Raster cqt = random_raster(rng);
    PitchSalience sal = random_salience(rng);
    Hsf hsf = build_hsf(sal, 3);

    SUBCASE("resblock1d: one 258x88 channel") {
        auto in = assemble_input(ModelSpec{Variant::resblock1d}, cqt, nullptr, nullptr);
        CHECK(in.shape == std::array<int, 3>{1, 258, 88});
        CHECK(in.flat.rows() == 88);
        CHECK(in.flat.cols() == 258);
    }
    SUBCASE("cqt_pitch_f: 258x176 frequency concatenation") {
        auto in = assemble_input(ModelSpec{Variant::cqt_pitch_f}, cqt, &sal, nullptr);
        CHECK(in.shape == std::array<int, 3>{1, 258, 176});
        CHECK(in.flat.rows() == 176);
    }
    SUBCASE("cqt_hsf: second channel carries the HSF") {
        ModelSpec spec{Variant::cqt_hsf, 3};
        auto in = assemble_input(spec, cqt, nullptr, &hsf);
        CHECK(in.shape == std::array<int, 3>{2, 258, 88});
        CHECK(in.flat.topRows(88) == cqt.transpose());
        CHECK(in.flat.bottomRows(88) == hsf.data.transpose());
    }
    SUBCASE("zero salience gives a zero second channel") {
        PitchSalience zero;
        zero.data = Raster::Zero(kFramesPerSegment, kPitchBins);
        Hsf zero_hsf = build_hsf(zero, 3);
        auto in = assemble_input(ModelSpec{Variant::cqt_hsf, 3}, cqt, nullptr, &zero_hsf);
        CHECK(in.flat.bottomRows(88).isZero());
        CHECK(in.flat.topRows(88) == cqt.transpose());
    }
    SUBCASE("missing components name the variant and the component") {
        CHECK_THROWS_WITH_AS(assemble_input(ModelSpec{Variant::cqt_hsf}, cqt, &sal, nullptr),
                             doctest::Contains("cqt_hsf"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(assemble_input(ModelSpec{Variant::cqt_pitch_c}, cqt, nullptr, &hsf),
                             doctest::Contains("salience"), std::invalid_argument);
    }
    SUBCASE("model spec json round-trip") {
        ModelSpec spec{Variant::cqt_hsf, 4, 96};
        ModelSpec back = ModelSpec::from_json(spec.to_json());
        CHECK(back.variant == Variant::cqt_hsf);
        CHECK(back.hsf_n == 4);
        CHECK(back.width == 96);
    }
}

TEST_CASE("all five variants produce (258, 7) rolls in [0, 1]") {
    std::mt19937 rng(2);
    for (Variant v : kAllVariants) {
        ModelSpec spec{v, 2, 16}; // narrow trunk keeps this test quick
        Model model(spec, 123);
        Raster roll = predict_roll(model, input_for(spec, rng));
        CHECK(roll.rows() == 258);
        CHECK(roll.cols() == 7);
        CHECK(roll.minCoeff() > 0.0f);
        CHECK(roll.maxCoeff() < 1.0f);
        CHECK(roll.allFinite());
    }
}

TEST_CASE("inference is deterministic and batch-duplication invariant") {
    std::mt19937 rng(3);
    ModelSpec spec{Variant::resblock1d, 3, 16};
    Model model(spec, 7);
    auto in = input_for(spec, rng);
    auto out = model.forward({in, in}, false);
    CHECK(out[0] == out[1]);
    auto again = model.forward({in}, false);
    CHECK(again[0] == out[0]);
}

TEST_CASE("1D variants are time-shift equivariant away from boundaries") {
    std::mt19937 rng(4);
    ModelSpec spec{Variant::resblock1d, 3, 16};
    Model model(spec, 9);
    auto in = input_for(spec, rng);
    const int k = 10;
    ModelInput shifted;
    shifted.shape = in.shape;
    shifted.flat = Mat::Zero(in.flat.rows(), in.flat.cols());
    shifted.flat.rightCols(kFramesPerSegment - k) = in.flat.leftCols(kFramesPerSegment - k);
    auto base = model.forward({in}, false)[0];
    auto moved = model.forward({shifted}, false)[0];
    // receptive field of 11 stacked k=3 convs is ~23 frames; compare well inside
    for (int t = 40; t < kFramesPerSegment - 40; ++t)
        for (int n = 0; n < kNumInstruments; ++n)
            CHECK(moved(n, t + k) == doctest::Approx(base(n, t)).epsilon(1e-3));
}

TEST_CASE("zeroed residual branches make blocks the identity") {
    const int w = 16;
    ModelSpec spec{Variant::resblock1d, 3, w};
    Model model(spec, 5);
    auto params = model.parameters();
    // layout: [early conv w,b][early bn gamma,beta][3 blocks x 3 x (conv w,b, bn gamma,beta)]
    // [head conv w,b]
    REQUIRE(params.size() == 4 + 9 * 4 + 2);
    for (size_t i = 4; i < params.size() - 2; ++i)
        std::fill(params[i].value, params[i].value + params[i].size, 0.0f);

    std::mt19937 rng(6);
    auto in = input_for(spec, rng);
    auto out = model.forward({in}, false)[0];

    // Hand-computed oracle: early conv (k=3, same pad) -> inference bn with
    // fresh running stats (mean 0, var 1) -> relu -> identity blocks ->
    // head conv (k=1). Conv weight columns are laid out (tap * in + ch).
    const Mat& we = Eigen::Map<Mat>(params[0].value, w, 88 * 3);
    const Mat& wh = Eigen::Map<Mat>(params[params.size() - 2].value, 7, w);
    Mat act = Mat::Zero(w, kFramesPerSegment);
    for (int t = 0; t < kFramesPerSegment; ++t)
        for (int j = 0; j < 3; ++j) {
            int src = t + j - 1;
            if (src < 0 || src >= kFramesPerSegment) continue;
            act.col(t) += we.block(0, j * 88, w, 88) * in.flat.col(src);
        }
    act /= std::sqrt(1.0f + 1e-5f); // bn: gamma 1, beta 0, running stats (0, 1)
    act = act.cwiseMax(0.0f);
    Mat expect = wh * act; // head bias is zero-initialized
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-4f);
}

TEST_CASE("every parameter receives gradient somewhere") {
    std::mt19937 rng(8);
    for (Variant v : {Variant::resblock1d, Variant::baseline2d}) {
        ModelSpec spec{v, 3, 8};
        Model model(spec, 11);
        model.zero_grad();
        auto in = input_for(spec, rng);
        auto logits = model.forward({in}, true);
        nets::Batch1d labels = {Mat::Ones(kNumInstruments, kFramesPerSegment)};
        train::LossConfig loss;
        model.backward(train::weighted_bce_grad(logits, labels, loss));
        for (auto& p : model.parameters()) {
            float max_abs = 0;
            for (long i = 0; i < p.size; ++i) max_abs = std::max(max_abs, std::abs(p.grad[i]));
            CHECK(max_abs > 0.0f);
        }
    }
}

TEST_CASE("model gradients match finite differences on a tiny net") {
    // exercises conv1d, batch norm, relu, residual add end to end
    std::mt19937 rng(10);
    ModelSpec spec{Variant::resblock1d, 3, 4};
    Model model(spec, 13);
    auto in = input_for(spec, rng);
    nets::Batch1d labels = {Mat::Zero(kNumInstruments, kFramesPerSegment)};
    for (int n = 0; n < kNumInstruments; ++n)
        for (int t = 0; t < kFramesPerSegment; ++t) labels[0](n, t) = float(rng() % 2);
    train::LossConfig loss;
    loss.class_weights << 1, 2, 1, 3, 1, 1, 2;

    model.zero_grad();
    auto logits = model.forward({in}, true);
    model.backward(train::weighted_bce_grad(logits, labels, loss));

    auto params = model.parameters();
    std::uniform_int_distribution<long> pick_param(0, long(params.size()) - 1);
    const float h = 1e-2f;
    int checked = 0;
    while (checked < 25) {
        auto& p = params[size_t(pick_param(rng))];
        long i = long(rng() % uint64_t(p.size));
        float saved = p.value[i];
        p.value[i] = saved + h;
        float up = train::weighted_bce(model.forward({in}, true), labels, loss);
        p.value[i] = saved - h;
        float down = train::weighted_bce(model.forward({in}, true), labels, loss);
        p.value[i] = saved;
        float fd = (up - down) / (2 * h);
        if (std::abs(fd) < 1e-6f) continue; // dead direction, skip
        CHECK(p.grad[i] == doctest::Approx(fd).epsilon(0.05));
        ++checked;
    }
}

TEST_CASE("model state round-trips") {
    ModelSpec spec{Variant::cqt_hsf, 2, 8};
    Model a(spec, 21);
    Model b(spec, 22);
    std::mt19937 rng(12);
    auto in = input_for(spec, rng);
    CHECK(a.forward({in}, false)[0] != b.forward({in}, false)[0]);
    b.set_state(a.state());
    CHECK(a.forward({in}, false)[0] == b.forward({in}, false)[0]);
    CHECK_THROWS(b.set_state(std::vector<float>(3, 0.0f)));
}
