#include "fir/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fir::train {

namespace {

inline double softplus(double x) {
    // log(1 + e^x) without overflow
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void check_shapes(const nets::Batch1d& logits, const nets::Batch1d& labels) {
    if (logits.size() != labels.size())
        throw std::invalid_argument("loss: batch size mismatch");
    for (size_t s = 0; s < logits.size(); ++s)
        if (logits[s].rows() != labels[s].rows() || logits[s].cols() != labels[s].cols())
            throw std::invalid_argument("loss: logits/labels shape mismatch");
}

} // namespace

double weighted_bce(const nets::Batch1d& logits, const nets::Batch1d& labels,
                   const LossConfig& loss) {
    check_shapes(logits, labels);
    double total = 0;
    long count = 0;
    for (size_t s = 0; s < logits.size(); ++s) {
        const nets::Mat& z = logits[s]; // (7 x T)
        const nets::Mat& y = labels[s];
        for (int n = 0; n < z.rows(); ++n) {
            const double w = loss.class_weights[n];
            for (int t = 0; t < z.cols(); ++t) {
                const double zv = z(n, t), yv = y(n, t);
                // log sigmoid(z) = -softplus(-z); log(1-sigmoid(z)) = -softplus(z)
                total += w * yv * softplus(-zv) + (1.0 - yv) * softplus(zv);
            }
        }
        count += z.size();
    }
    return total / double(count);
}

nets::Batch1d weighted_bce_grad(const nets::Batch1d& logits, const nets::Batch1d& labels,
                                const LossConfig& loss) {
    check_shapes(logits, labels);
    long count = 0;
    for (const auto& z : logits) count += z.size();
    nets::Batch1d grads(logits.size());
    for (size_t s = 0; s < logits.size(); ++s) {
        const nets::Mat& z = logits[s];
        const nets::Mat& y = labels[s];
        nets::Mat g(z.rows(), z.cols());
        for (int n = 0; n < z.rows(); ++n) {
            const float w = loss.class_weights[n];
            for (int t = 0; t < z.cols(); ++t) {
                const float sig = 1.0f / (1.0f + std::exp(-z(n, t)));
                const float yv = y(n, t);
                // d/dz of the per-entry loss
                g(n, t) = ((1.0f - yv) * sig - w * yv * (1.0f - sig)) / float(count);
            }
        }
        grads[s] = std::move(g);
    }
    return grads;
}

LossConfig compute_class_weights(const std::vector<Raster>& label_rolls, float weight_cap) {
    Eigen::VectorXd pos = Eigen::VectorXd::Zero(kNumInstruments);
    long frames = 0;
    for (const auto& roll : label_rolls) {
        if (roll.cols() != kNumInstruments)
            throw std::invalid_argument("class weights: label roll must have 7 columns");
        pos += roll.cast<double>().colwise().sum();
        frames += roll.rows();
    }
    LossConfig cfg;
    cfg.weight_cap = weight_cap;
    for (int n = 0; n < kNumInstruments; ++n) {
        double n_pos = pos[n];
        double n_neg = double(frames) - n_pos;
        if (n_pos <= 0) {
            std::cerr << "warning: instrument " << n
                      << " has zero positive frames; class weight set to cap " << weight_cap
                      << "\n";
            cfg.class_weights[n] = weight_cap;
        } else {
            double w = n_neg / std::max(n_pos, 1.0);
            cfg.class_weights[n] = float(std::min(double(weight_cap), std::max(1.0, w)));
        }
    }
    return cfg;
}

namespace {

struct Counts {
    long tp = 0, fp = 0, fn = 0;
};

Counts count_at(const std::vector<Raster>& predictions, const std::vector<Raster>& labels, int n,
                float theta) {
    Counts c;
    for (size_t s = 0; s < predictions.size(); ++s) {
        const Raster& p = predictions[s];
        const Raster& y = labels[s];
        for (int t = 0; t < p.rows(); ++t) {
            bool pred = p(t, n) > theta;
            bool truth = y(t, n) > 0.5f;
            if (pred && truth) ++c.tp;
            else if (pred && !truth) ++c.fp;
            else if (!pred && truth) ++c.fn;
        }
    }
    return c;
}

double f1_of(const Counts& c) {
    double denom = 2.0 * double(c.tp) + double(c.fp) + double(c.fn);
    return denom > 0 ? 2.0 * double(c.tp) / denom : 0.0;
}

void check_rolls(const std::vector<Raster>& predictions, const std::vector<Raster>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("eval: prediction/label segment count mismatch");
    for (size_t s = 0; s < predictions.size(); ++s)
        if (predictions[s].rows() != labels[s].rows() || predictions[s].cols() != labels[s].cols() ||
            predictions[s].cols() != kNumInstruments)
            throw std::invalid_argument("eval: roll shape mismatch");
}

} // namespace

ThresholdVector tune_thresholds(const std::vector<Raster>& predictions,
                                const std::vector<Raster>& labels) {
    check_rolls(predictions, labels);
    ThresholdVector out{};
    for (int n = 0; n < kNumInstruments; ++n) {
        double best_f1 = -1;
        float best_theta = 0.01f;
        for (int i = 1; i <= 99; ++i) {
            float theta = float(i) / 100.0f;
            double f1 = f1_of(count_at(predictions, labels, n, theta));
            if (f1 > best_f1) { // strict: ties keep the smallest theta
                best_f1 = f1;
                best_theta = theta;
            }
        }
        out.theta[size_t(n)] = best_theta;
    }
    return out;
}

EvalReport frame_f1(const std::vector<Raster>& predictions, const std::vector<Raster>& labels,
                    const ThresholdVector& thresholds,
                    const std::vector<std::string>& instrument_names) {
    check_rolls(predictions, labels);
    EvalReport rep;
    rep.thresholds = thresholds;
    double sum_f1 = 0;
    for (int n = 0; n < kNumInstruments; ++n) {
        Counts c = count_at(predictions, labels, n, thresholds.theta[size_t(n)]);
        InstrumentScore sc;
        sc.name = n < int(instrument_names.size()) ? instrument_names[size_t(n)]
                                                   : "instrument" + std::to_string(n);
        sc.tp = c.tp;
        sc.fp = c.fp;
        sc.fn = c.fn;
        sc.precision = (c.tp + c.fp) > 0 ? double(c.tp) / double(c.tp + c.fp) : 0.0;
        sc.recall = (c.tp + c.fn) > 0 ? double(c.tp) / double(c.tp + c.fn) : 0.0;
        sc.f1 = f1_of(c);
        sum_f1 += sc.f1;
        rep.per_instrument.push_back(sc);
    }
    rep.macro_f1 = sum_f1 / double(kNumInstruments);
    return rep;
}

void split_by_clip(const std::vector<TrainExample>& all, float validation_fraction,
                   std::vector<TrainExample>& train_out, std::vector<TrainExample>& val_out) {
    std::vector<std::string> clip_order;
    for (const auto& ex : all)
        if (std::find(clip_order.begin(), clip_order.end(), ex.clip_id) == clip_order.end())
            clip_order.push_back(ex.clip_id);
    size_t n_val = size_t(std::floor(double(clip_order.size()) * validation_fraction));
    if (n_val == 0 && clip_order.size() > 1 && validation_fraction > 0) n_val = 1;
    std::vector<std::string> val_clips(clip_order.end() - long(n_val), clip_order.end());
    for (const auto& ex : all) {
        bool in_val = std::find(val_clips.begin(), val_clips.end(), ex.clip_id) != val_clips.end();
        (in_val ? val_out : train_out).push_back(ex);
    }
}

namespace {

// Validation macro F1 with thresholds tuned on the validation frames
// themselves; used for model selection only (reported thresholds come
// from a separate tuning pass on training predictions).
double validation_f1(nets::Model& model, const std::vector<TrainExample>& val) {
    if (val.empty()) return 0.0;
    std::vector<Raster> preds, labels;
    for (const auto& ex : val) {
        preds.push_back(nets::predict_roll(model, ex.input));
        labels.push_back(ex.label_roll);
    }
    ThresholdVector th = tune_thresholds(preds, labels);
    return frame_f1(preds, labels, th, {}).macro_f1;
}

} // namespace

TrainResult train(nets::Model& model, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& validation_set, const TrainConfig& cfg,
                  const LossConfig& loss, const std::function<void(const EpochLog&)>& on_epoch) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");

    auto params = model.parameters();
    std::vector<std::vector<float>> velocity;
    for (const auto& p : params) velocity.emplace_back(size_t(p.size), 0.0f);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t(0));

    TrainResult result;
    result.best_val_f1 = -1;
    float lr = cfg.initial_lr;
    int stall = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        int n_batches = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += size_t(cfg.batch_size)) {
            size_t b1 = std::min(order.size(), b0 + size_t(cfg.batch_size));
            std::vector<nets::ModelInput> inputs;
            nets::Batch1d labels;
            for (size_t i = b0; i < b1; ++i) {
                inputs.push_back(train_set[order[i]].input);
                labels.push_back(train_set[order[i]].label_roll.transpose()); // (7 x 258)
            }
            model.zero_grad();
            nets::Batch1d logits = model.forward(inputs, true);
            double batch_loss = weighted_bce(logits, labels, loss);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(n_batches) + ", lr " + std::to_string(lr));
            model.backward(weighted_bce_grad(logits, labels, loss));
            for (size_t p = 0; p < params.size(); ++p) {
                float* v = velocity[p].data();
                const float* g = params[p].grad;
                float* w = params[p].value;
                for (long i = 0; i < params[p].size; ++i) {
                    v[i] = cfg.momentum * v[i] + g[i];
                    w[i] -= lr * v[i];
                }
            }
            epoch_loss += batch_loss;
            ++n_batches;
        }
        epoch_loss /= std::max(1, n_batches);

        double val_f1 = validation_f1(model, validation_set);
        EpochLog log{epoch, epoch_loss, val_f1, lr};
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);

        if (val_f1 > result.best_val_f1 || result.best_state.empty()) {
            result.best_val_f1 = val_f1;
            result.best_epoch = epoch;
            result.best_state = model.state();
            stall = 0;
        } else if (++stall >= cfg.lr_patience) {
            lr *= 0.5f;
            stall = 0;
        }
    }
    return result;
}

} // namespace fir::train
