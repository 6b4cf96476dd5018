#ifndef FIR_TRAIN_HPP
#define FIR_TRAIN_HPP

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "fir/geometry.hpp"
#include "fir/nets.hpp"

namespace fir::train {

struct LossConfig {
    // One positive weight per instrument, >= 1; amplifies positive-label
    // terms to counter class imbalance.
    Eigen::VectorXf class_weights = Eigen::VectorXf::Ones(kNumInstruments);
    float weight_cap = 10.0f;
};

struct TrainConfig {
    float momentum = 0.9f;
    float initial_lr = 0.01f;
    int batch_size = 16;
    int max_epochs = 100;
    // Halve the learning rate when validation macro F1 has not improved
    // for this many epochs.
    int lr_patience = 5;
    uint64_t seed = 0;
    // Fraction of training clips (tail of the manifest order) held out
    // for model selection.
    float validation_fraction = 0.1f;
};

// Mean over frames and instruments of
//   -[w_n * y * log sigmoid(z) + (1 - y) * log(1 - sigmoid(z))]
// with z the pre-sigmoid logits. Numerically stable via softplus.
// logits/labels are (7 x 258) per sample (model layout).
double weighted_bce(const nets::Batch1d& logits, const nets::Batch1d& labels, const LossConfig& loss);

// d(weighted_bce)/d(logits), same shapes.
nets::Batch1d weighted_bce_grad(const nets::Batch1d& logits, const nets::Batch1d& labels,
                                const LossConfig& loss);

// w_n = clamp(N_neg / max(N_pos, 1), 1, cap) over all training frames.
// Instruments with zero positive frames get the cap with a warning.
LossConfig compute_class_weights(const std::vector<Raster>& label_rolls, float weight_cap = 10.0f);

// Per-instrument decision thresholds from the 0.01..0.99 grid.
struct ThresholdVector {
    std::array<float, kNumInstruments> theta;
};

// Independent argmax per instrument of F1 over concatenated frames, over
// the 99-candidate grid; ties break toward the smallest threshold.
// predictions/labels are (258 x 7) rolls, concatenated over segments.
ThresholdVector tune_thresholds(const std::vector<Raster>& predictions,
                                const std::vector<Raster>& labels);

struct InstrumentScore {
    std::string name;
    long tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
    std::vector<InstrumentScore> per_instrument; // 7 entries, catalog order
    double macro_f1 = 0;
    ThresholdVector thresholds{};
    std::string config_hash;
};

EvalReport frame_f1(const std::vector<Raster>& predictions, const std::vector<Raster>& labels,
                    const ThresholdVector& thresholds,
                    const std::vector<std::string>& instrument_names);

// One training example already assembled for the model.
struct TrainExample {
    nets::ModelInput input;
    Raster label_roll; // 258 x 7
    std::string clip_id;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0;
    double val_macro_f1 = 0;
    float lr = 0;
};

struct TrainResult {
    std::vector<float> best_state; // model state at best validation F1
    double best_val_f1 = 0;
    int best_epoch = 0;
    std::vector<EpochLog> log;
};

// SGD with momentum over shuffled minibatches; per-epoch validation on a
// clip-level holdout; keeps the best-validation state. Deterministic
// given the seed. Throws on non-finite loss.
TrainResult train(nets::Model& model, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& validation_set, const TrainConfig& cfg,
                  const LossConfig& loss,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// Splits examples into train/validation by clip, holding out the last
// validation_fraction of the distinct clip ids (manifest order).
void split_by_clip(const std::vector<TrainExample>& all, float validation_fraction,
                   std::vector<TrainExample>& train_out, std::vector<TrainExample>& val_out);

} // namespace fir::train

#endif
