#ifndef FIR_NETS_HPP
#define FIR_NETS_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fir/geometry.hpp"
#include "fir/hsf.hpp"

namespace fir::nets {

using Mat = Eigen::MatrixXf;

// 1D path: one sample is (channels x time). 2D path: one sample is a
// stack of (time x freq) planes.
using Batch1d = std::vector<Mat>;
using Sample2d = std::vector<Mat>;
using Batch2d = std::vector<Sample2d>;

enum class Variant { baseline2d, resblock1d, cqt_hsf, cqt_pitch_f, cqt_pitch_c };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name); // throws listing valid names

enum class LayerKind { conv1d, conv2d, batch_norm, relu, pool_freq2, freq_avg, res_begin, res_end };

struct LayerDesc {
    LayerKind kind;
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 0; // time extent for conv1d, square extent for conv2d
};

// Declarative description of one architecture variant.
struct ModelSpec {
    Variant variant = Variant::resblock1d;
    int hsf_n = 3;   // meaningful for cqt_hsf only
    int width = 128; // residual trunk width

    // Flattened input channels of the leading 1D conv (1D variants).
    int input_channels_1d() const;
    // Reported input arrangement, (channels, frames, freq bins).
    std::array<int, 3> input_shape() const;
    bool needs_salience() const;
    bool needs_hsf() const { return variant == Variant::cqt_hsf; }
    bool is_1d() const { return variant != Variant::baseline2d; }

    std::vector<LayerDesc> layer_plan() const;
    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
};

int count_conv_layers(const ModelSpec& spec);

// One assembled network input; which member is populated depends on the
// variant (flat for the 1D family, planes for baseline2d).
struct ModelInput {
    Mat flat;       // (flattened channels x 258)
    Sample2d planes;
    std::array<int, 3> shape{0, 0, 0};
};

ModelInput assemble_input(const ModelSpec& spec, const Raster& cqt, const PitchSalience* salience,
                          const Hsf* hsf);

struct ParamRef {
    float* value;
    float* grad;
    long size;
};

class Layer; // internal

// A network instance for one ModelSpec. Forward produces per-frame
// instrument logits; apply sigmoid() for likelihoods. Training mutates
// parameters and batch-norm statistics and must be externally
// synchronized; inference-mode forward is const-safe and deterministic.
class Model {
public:
    explicit Model(const ModelSpec& spec, uint64_t seed = 0);
    ~Model();
    Model(Model&&) noexcept;
    Model& operator=(Model&&) noexcept;

    const ModelSpec& spec() const { return spec_; }

    // Logits, one (7 x 258) matrix per sample.
    Batch1d forward(const std::vector<ModelInput>& inputs, bool training);
    // After forward(training=true): propagates d(loss)/d(logits) and
    // accumulates parameter gradients.
    void backward(const Batch1d& grad_logits);

    std::vector<ParamRef> parameters();
    void zero_grad();
    long num_params();

    // Trainable parameters plus batch-norm running statistics.
    std::vector<float> state() const;
    void set_state(const std::vector<float>& state);

private:
    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Likelihood roll (258 x 7) from one input, inference mode.
Raster predict_roll(Model& model, const ModelInput& input);

} // namespace fir::nets

#endif
