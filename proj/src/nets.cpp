#include "fir/nets.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

namespace fir::nets {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::baseline2d: return "baseline2d";
        case Variant::resblock1d: return "resblock1d";
        case Variant::cqt_hsf: return "cqt_hsf";
        case Variant::cqt_pitch_f: return "cqt_pitch_f";
        case Variant::cqt_pitch_c: return "cqt_pitch_c";
    }
    throw std::logic_error("unreachable");
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::baseline2d, Variant::resblock1d, Variant::cqt_hsf,
                      Variant::cqt_pitch_f, Variant::cqt_pitch_c})
        if (variant_name(v) == name) return v;
    throw std::invalid_argument("unknown model variant '" + name +
                                "'; valid: baseline2d, resblock1d, cqt_hsf, cqt_pitch_f, "
                                "cqt_pitch_c");
}

int ModelSpec::input_channels_1d() const {
    switch (variant) {
        case Variant::resblock1d: return kPitchBins;
        case Variant::cqt_hsf:
        case Variant::cqt_pitch_f:
        case Variant::cqt_pitch_c: return 2 * kPitchBins;
        case Variant::baseline2d: break;
    }
    throw std::logic_error("baseline2d has no flattened 1D input");
}

std::array<int, 3> ModelSpec::input_shape() const {
    switch (variant) {
        case Variant::baseline2d:
        case Variant::resblock1d: return {1, kFramesPerSegment, kPitchBins};
        case Variant::cqt_hsf:
        case Variant::cqt_pitch_c: return {2, kFramesPerSegment, kPitchBins};
        case Variant::cqt_pitch_f: return {1, kFramesPerSegment, 2 * kPitchBins};
    }
    throw std::logic_error("unreachable");
}

bool ModelSpec::needs_salience() const {
    return variant == Variant::cqt_pitch_f || variant == Variant::cqt_pitch_c;
}

std::vector<LayerDesc> ModelSpec::layer_plan() const {
    std::vector<LayerDesc> plan;
    if (variant == Variant::baseline2d) {
        int in = 1;
        for (int out : {32, 64, 128, 256}) {
            plan.push_back({LayerKind::conv2d, in, out, 3});
            plan.push_back({LayerKind::batch_norm, out, out, 0});
            plan.push_back({LayerKind::relu, out, out, 0});
            plan.push_back({LayerKind::pool_freq2, out, out, 2});
            in = out;
        }
        plan.push_back({LayerKind::freq_avg, in, in, 0});
        plan.push_back({LayerKind::conv1d, in, kNumInstruments, 1});
        return plan;
    }
    const int w = width;
    plan.push_back({LayerKind::conv1d, input_channels_1d(), w, 3});
    plan.push_back({LayerKind::batch_norm, w, w, 0});
    plan.push_back({LayerKind::relu, w, w, 0});
    for (int b = 0; b < 3; ++b) {
        plan.push_back({LayerKind::res_begin, w, w, 0});
        for (int c = 0; c < 3; ++c) {
            plan.push_back({LayerKind::conv1d, w, w, 3});
            plan.push_back({LayerKind::batch_norm, w, w, 0});
            plan.push_back({LayerKind::relu, w, w, 0});
        }
        plan.push_back({LayerKind::res_end, w, w, 0});
    }
    plan.push_back({LayerKind::conv1d, w, kNumInstruments, 1});
    return plan;
}

int count_conv_layers(const ModelSpec& spec) {
    int n = 0;
    for (const auto& d : spec.layer_plan())
        if (d.kind == LayerKind::conv1d || d.kind == LayerKind::conv2d) ++n;
    return n;
}

std::string ModelSpec::to_json() const {
    nlohmann::json j = {{"variant", variant_name(variant)}, {"hsf_n", hsf_n}, {"width", width}};
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelSpec s;
    s.variant = variant_from_name(j.at("variant").get<std::string>());
    s.hsf_n = j.value("hsf_n", 3);
    s.width = j.value("width", 128);
    return s;
}

ModelInput assemble_input(const ModelSpec& spec, const Raster& cqt, const PitchSalience* salience,
                          const Hsf* hsf) {
    if (cqt.rows() != kFramesPerSegment || cqt.cols() != kPitchBins)
        throw std::invalid_argument("assemble_input: CQT must be 258x88");
    ModelInput in;
    in.shape = spec.input_shape();
    switch (spec.variant) {
        case Variant::baseline2d:
            in.planes = {cqt};
            return in;
        case Variant::resblock1d:
            in.flat = cqt.transpose();
            return in;
        case Variant::cqt_hsf: {
            if (!hsf)
                throw std::invalid_argument("variant cqt_hsf requires an HSF component");
            if (hsf->data.rows() != cqt.rows() || hsf->data.cols() != cqt.cols())
                throw std::invalid_argument("assemble_input: HSF shape mismatch");
            in.flat.resize(2 * kPitchBins, kFramesPerSegment);
            in.flat.topRows(kPitchBins) = cqt.transpose();
            in.flat.bottomRows(kPitchBins) = hsf->data.transpose();
            return in;
        }
        case Variant::cqt_pitch_f:
        case Variant::cqt_pitch_c: {
            if (!salience)
                throw std::invalid_argument("variant " + variant_name(spec.variant) +
                                            " requires a pitch salience component");
            if (salience->data.rows() != cqt.rows() || salience->data.cols() != cqt.cols())
                throw std::invalid_argument("assemble_input: salience shape mismatch");
            in.flat.resize(2 * kPitchBins, kFramesPerSegment);
            in.flat.topRows(kPitchBins) = cqt.transpose();
            in.flat.bottomRows(kPitchBins) = salience->data.transpose();
            return in;
        }
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Layers. Activations move through a small variant record; 1D layers use
// `flat` ((channels x time) per sample), 2D layers use `planes`.

struct Act {
    Batch1d flat;
    Batch2d planes;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual void forward(Act& a, bool training) = 0;
    virtual void backward(Act& g) = 0;
    virtual void collect(std::vector<ParamRef>& out) { (void)out; }
    virtual void collect_buffers(std::vector<std::pair<float*, long>>& out) { (void)out; }
};

namespace {

float he_std(long fan_in) { return std::sqrt(2.0f / float(fan_in)); }

void fill_normal(Mat& m, std::mt19937_64& rng, float std_dev) {
    std::normal_distribution<float> d(0.0f, std_dev);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
}

class Conv1d : public Layer {
public:
    Conv1d(int in_ch, int out_ch, int kernel, std::mt19937_64& rng)
        : in_(in_ch), out_(out_ch), k_(kernel), pad_((kernel - 1) / 2) {
        w_.resize(out_, in_ * k_);
        fill_normal(w_, rng, he_std(long(in_) * k_));
        b_ = Eigen::VectorXf::Zero(out_);
        gw_ = Mat::Zero(out_, in_ * k_);
        gb_ = Eigen::VectorXf::Zero(out_);
    }

    void forward(Act& a, bool training) override {
        cols_.resize(a.flat.size());
        for (size_t s = 0; s < a.flat.size(); ++s) {
            const Mat& x = a.flat[s];
            const int t_len = int(x.cols());
            Mat col = Mat::Zero(long(in_) * k_, t_len);
            for (int j = 0; j < k_; ++j) {
                int src0 = std::max(0, pad_ - j);
                int src1 = t_len - std::max(0, j - pad_);
                if (src1 <= src0) continue;
                col.block(long(j) * in_, src0, in_, src1 - src0) =
                    x.block(0, src0 + j - pad_, in_, src1 - src0);
            }
            Mat y = w_ * col;
            y.colwise() += b_;
            if (training) cols_[s] = std::move(col);
            a.flat[s] = std::move(y);
        }
        if (!training) cols_.clear();
    }

    void backward(Act& g) override {
        for (size_t s = 0; s < g.flat.size(); ++s) {
            const Mat& gy = g.flat[s];
            const int t_len = int(gy.cols());
            gw_.noalias() += gy * cols_[s].transpose();
            gb_ += gy.rowwise().sum();
            Mat gcol = w_.transpose() * gy;
            Mat gx = Mat::Zero(in_, t_len);
            for (int j = 0; j < k_; ++j) {
                int src0 = std::max(0, pad_ - j);
                int src1 = t_len - std::max(0, j - pad_);
                if (src1 <= src0) continue;
                gx.block(0, src0 + j - pad_, in_, src1 - src0) +=
                    gcol.block(long(j) * in_, src0, in_, src1 - src0);
            }
            g.flat[s] = std::move(gx);
        }
        cols_.clear();
    }

    void collect(std::vector<ParamRef>& out) override {
        out.push_back({w_.data(), gw_.data(), w_.size()});
        out.push_back({b_.data(), gb_.data(), b_.size()});
    }

private:
    int in_, out_, k_, pad_;
    Mat w_, gw_;
    Eigen::VectorXf b_, gb_;
    std::vector<Mat> cols_;
};

class Conv2d : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int kernel, std::mt19937_64& rng)
        : in_(in_ch), out_(out_ch), k_(kernel), pad_((kernel - 1) / 2) {
        w_.resize(out_, long(in_) * k_ * k_);
        fill_normal(w_, rng, he_std(long(in_) * k_ * k_));
        b_ = Eigen::VectorXf::Zero(out_);
        gw_ = Mat::Zero(out_, long(in_) * k_ * k_);
        gb_ = Eigen::VectorXf::Zero(out_);
    }

    void forward(Act& a, bool training) override {
        cols_.resize(a.planes.size());
        for (size_t s = 0; s < a.planes.size(); ++s) {
            const Sample2d& x = a.planes[s];
            const int h = int(x[0].rows()), w = int(x[0].cols());
            Mat col = Mat::Zero(long(in_) * k_ * k_, long(h) * w);
            im2col(x, h, w, col);
            Mat y = w_ * col; // (out, h*w)
            y.colwise() += b_;
            Sample2d planes{size_t(out_)};
            for (int c = 0; c < out_; ++c)
                planes[size_t(c)] = Eigen::Map<const Mat>(y.row(c).eval().data(), h, w);
            if (training) cols_[s] = std::move(col);
            a.planes[s] = std::move(planes);
        }
        if (!training) cols_.clear();
    }

    void backward(Act& g) override {
        for (size_t s = 0; s < g.planes.size(); ++s) {
            const Sample2d& gy_planes = g.planes[s];
            const int h = int(gy_planes[0].rows()), w = int(gy_planes[0].cols());
            Mat gy(out_, long(h) * w);
            for (int c = 0; c < out_; ++c)
                gy.row(c) = Eigen::Map<const Eigen::VectorXf>(gy_planes[size_t(c)].data(),
                                                              long(h) * w)
                                .transpose();
            gw_.noalias() += gy * cols_[s].transpose();
            gb_ += gy.rowwise().sum();
            Mat gcol = w_.transpose() * gy;
            Sample2d gx{size_t(in_)};
            for (int c = 0; c < in_; ++c) gx[size_t(c)] = Mat::Zero(h, w);
            col2im(gcol, h, w, gx);
            g.planes[s] = std::move(gx);
        }
        cols_.clear();
    }

    void collect(std::vector<ParamRef>& out) override {
        out.push_back({w_.data(), gw_.data(), w_.size()});
        out.push_back({b_.data(), gb_.data(), b_.size()});
    }

private:
    // Row index (c*k + dr)*k + dc; column index r*w + col (column-major
    // plane storage maps (r, col) -> col*h + r; we keep Eigen's layout by
    // addressing planes through Map, so linear index is col*h + r).
    void im2col(const Sample2d& x, int h, int w, Mat& col) const {
        for (int c = 0; c < in_; ++c) {
            const Mat& plane = x[size_t(c)];
            for (int dr = 0; dr < k_; ++dr) {
                for (int dc = 0; dc < k_; ++dc) {
                    const long row = (long(c) * k_ + dr) * k_ + dc;
                    for (int cc = 0; cc < w; ++cc) {
                        int src_c = cc + dc - pad_;
                        if (src_c < 0 || src_c >= w) continue;
                        int r0 = std::max(0, pad_ - dr);
                        int r1 = h - std::max(0, dr - pad_);
                        if (r1 <= r0) continue;
                        // output pixel (r, cc) <- input (r+dr-pad, src_c)
                        for (int r = r0; r < r1; ++r)
                            col(row, long(cc) * h + r) = plane(r + dr - pad_, src_c);
                    }
                }
            }
        }
    }

    void col2im(const Mat& gcol, int h, int w, Sample2d& gx) const {
        for (int c = 0; c < in_; ++c) {
            Mat& plane = gx[size_t(c)];
            for (int dr = 0; dr < k_; ++dr) {
                for (int dc = 0; dc < k_; ++dc) {
                    const long row = (long(c) * k_ + dr) * k_ + dc;
                    for (int cc = 0; cc < w; ++cc) {
                        int src_c = cc + dc - pad_;
                        if (src_c < 0 || src_c >= w) continue;
                        int r0 = std::max(0, pad_ - dr);
                        int r1 = h - std::max(0, dr - pad_);
                        for (int r = r0; r < r1; ++r)
                            plane(r + dr - pad_, src_c) += gcol(row, long(cc) * h + r);
                    }
                }
            }
        }
    }

    int in_, out_, k_, pad_;
    Mat w_, gw_;
    Eigen::VectorXf b_, gb_;
    std::vector<Mat> cols_;
};

class BatchNorm : public Layer {
public:
    explicit BatchNorm(int channels)
        : c_(channels),
          gamma_(Eigen::VectorXf::Ones(channels)),
          beta_(Eigen::VectorXf::Zero(channels)),
          ggamma_(Eigen::VectorXf::Zero(channels)),
          gbeta_(Eigen::VectorXf::Zero(channels)),
          run_mean_(Eigen::VectorXf::Zero(channels)),
          run_var_(Eigen::VectorXf::Ones(channels)) {}

    void forward(Act& a, bool training) override {
        is_2d_ = a.flat.empty();
        Eigen::VectorXf mean(c_), var(c_);
        if (training) {
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(c_), sum_sq = Eigen::VectorXd::Zero(c_);
            long n = 0;
            visit_channels(a, [&](int c, Eigen::Map<Eigen::ArrayXf> v) {
                sum[c] += double(v.sum());
                sum_sq[c] += double(v.square().sum());
                if (c == 0) n += v.size();
            });
            n_per_channel_ = n;
            for (int c = 0; c < c_; ++c) {
                mean[c] = float(sum[c] / double(n));
                var[c] = std::max(0.0f, float(sum_sq[c] / double(n)) - mean[c] * mean[c]);
            }
            run_mean_ = 0.9f * run_mean_ + 0.1f * mean;
            run_var_ = 0.9f * run_var_ + 0.1f * var;
            mean_ = mean;
            invstd_ = (var.array() + kEps).rsqrt();
        } else {
            mean = run_mean_;
            invstd_ = (run_var_.array() + kEps).rsqrt();
            mean_ = mean;
        }
        visit_channels(a, [&](int c, Eigen::Map<Eigen::ArrayXf> v) {
            v = (v - mean_[c]) * invstd_[c];
        });
        // keep xhat (normalized, pre-affine) for the backward pass
        if (training) xhat_ = a;
        visit_channels(a, [&](int c, Eigen::Map<Eigen::ArrayXf> v) {
            v = v * gamma_[c] + beta_[c];
        });
    }

    void backward(Act& g) override {
        const float n = float(n_per_channel_);
        // per channel: dx = gamma*invstd/N * (N*gy - sum(gy) - xhat*sum(gy*xhat))
        for (int c = 0; c < c_; ++c) {
            double sum_gy = 0, sum_gy_xhat = 0;
            each(g, c, [&](Eigen::Map<Eigen::ArrayXf> gy, Eigen::Map<Eigen::ArrayXf> xh) {
                sum_gy += double(gy.sum());
                sum_gy_xhat += double((gy * xh).sum());
            });
            gbeta_[c] += float(sum_gy);
            ggamma_[c] += float(sum_gy_xhat);
            const float k1 = gamma_[c] * invstd_[c] / n;
            const float s_gy = float(sum_gy), s_gx = float(sum_gy_xhat);
            each(g, c, [&](Eigen::Map<Eigen::ArrayXf> gy, Eigen::Map<Eigen::ArrayXf> xh) {
                gy = k1 * (n * gy - s_gy - xh * s_gx);
            });
        }
        xhat_ = Act{};
    }

    void collect(std::vector<ParamRef>& out) override {
        out.push_back({gamma_.data(), ggamma_.data(), gamma_.size()});
        out.push_back({beta_.data(), gbeta_.data(), beta_.size()});
    }

    void collect_buffers(std::vector<std::pair<float*, long>>& out) override {
        out.push_back({run_mean_.data(), run_mean_.size()});
        out.push_back({run_var_.data(), run_var_.size()});
    }

private:
    static constexpr float kEps = 1e-5f;

    // Row maps on column-major matrices are strided; channel rows go
    // through a contiguous scratch copy on the 1D path.
    template <typename F>
    void visit_channels(Act& a, F&& fn) {
        if (!is_2d_) {
            for (auto& x : a.flat)
                for (int c = 0; c < c_; ++c) {
                    Eigen::ArrayXf tmp = x.row(c).transpose().array();
                    Eigen::Map<Eigen::ArrayXf> v(tmp.data(), tmp.size());
                    fn(c, v);
                    x.row(c) = tmp.matrix().transpose();
                }
        } else {
            for (auto& s : a.planes)
                for (int c = 0; c < c_; ++c) {
                    Eigen::Map<Eigen::ArrayXf> v(s[size_t(c)].data(), s[size_t(c)].size());
                    fn(c, v);
                }
        }
    }

    template <typename F>
    void each(Act& g, int c, F&& fn) {
        if (!is_2d_) {
            for (size_t s = 0; s < g.flat.size(); ++s) {
                Eigen::ArrayXf gy = g.flat[s].row(c).transpose().array();
                Eigen::ArrayXf xh = xhat_.flat[s].row(c).transpose().array();
                Eigen::Map<Eigen::ArrayXf> gym(gy.data(), gy.size());
                Eigen::Map<Eigen::ArrayXf> xhm(xh.data(), xh.size());
                fn(gym, xhm);
                g.flat[s].row(c) = gy.matrix().transpose();
            }
        } else {
            for (size_t s = 0; s < g.planes.size(); ++s) {
                auto& gp = g.planes[s][size_t(c)];
                auto& xp = xhat_.planes[s][size_t(c)];
                Eigen::Map<Eigen::ArrayXf> gym(gp.data(), gp.size());
                Eigen::Map<Eigen::ArrayXf> xhm(xp.data(), xp.size());
                fn(gym, xhm);
            }
        }
    }

    int c_;
    bool is_2d_ = false;
    long n_per_channel_ = 0;
    Eigen::VectorXf gamma_, beta_, ggamma_, gbeta_;
    Eigen::VectorXf run_mean_, run_var_;
    Eigen::VectorXf mean_;
    Eigen::ArrayXf invstd_;
    Act xhat_;
};

class Relu : public Layer {
public:
    void forward(Act& a, bool training) override {
        for (auto& x : a.flat) x = x.cwiseMax(0.0f);
        for (auto& s : a.planes)
            for (auto& p : s) p = p.cwiseMax(0.0f);
        if (training) mask_ = a; // post-activation values; positive exactly where input was
    }

    void backward(Act& g) override {
        for (size_t s = 0; s < g.flat.size(); ++s)
            g.flat[s] = g.flat[s].cwiseProduct(
                (mask_.flat[s].array() > 0.0f).cast<float>().matrix());
        for (size_t s = 0; s < g.planes.size(); ++s)
            for (size_t c = 0; c < g.planes[s].size(); ++c)
                g.planes[s][c] = g.planes[s][c].cwiseProduct(
                    (mask_.planes[s][c].array() > 0.0f).cast<float>().matrix());
        mask_ = Act{};
    }

private:
    Act mask_;
};

// Halves the frequency axis (matrix columns) by max, dropping an odd tail
// column.
class PoolFreq2 : public Layer {
public:
    void forward(Act& a, bool training) override {
        argmax_.assign(a.planes.size(), {});
        for (size_t s = 0; s < a.planes.size(); ++s) {
            auto& planes = a.planes[s];
            argmax_[s].resize(planes.size());
            for (size_t c = 0; c < planes.size(); ++c) {
                const Mat& x = planes[c];
                const int h = int(x.rows()), w_out = int(x.cols()) / 2;
                Mat y(h, w_out);
                Eigen::MatrixXi am(h, w_out);
                for (int cc = 0; cc < w_out; ++cc)
                    for (int r = 0; r < h; ++r) {
                        if (x(r, 2 * cc) >= x(r, 2 * cc + 1)) {
                            y(r, cc) = x(r, 2 * cc);
                            am(r, cc) = 2 * cc;
                        } else {
                            y(r, cc) = x(r, 2 * cc + 1);
                            am(r, cc) = 2 * cc + 1;
                        }
                    }
                in_cols_ = int(x.cols());
                planes[c] = std::move(y);
                if (training) argmax_[s][c] = std::move(am);
            }
        }
        if (!training) argmax_.clear();
    }

    void backward(Act& g) override {
        for (size_t s = 0; s < g.planes.size(); ++s) {
            for (size_t c = 0; c < g.planes[s].size(); ++c) {
                const Mat& gy = g.planes[s][c];
                const Eigen::MatrixXi& am = argmax_[s][c];
                Mat gx = Mat::Zero(gy.rows(), in_cols_);
                for (int cc = 0; cc < gy.cols(); ++cc)
                    for (int r = 0; r < gy.rows(); ++r) gx(r, am(r, cc)) += gy(r, cc);
                g.planes[s][c] = std::move(gx);
            }
        }
        argmax_.clear();
    }

private:
    int in_cols_ = 0;
    std::vector<std::vector<Eigen::MatrixXi>> argmax_;
};

// Mean over the frequency axis; bridges the 2D path into the 1D path,
// yielding (channels x time).
class FreqAvg : public Layer {
public:
    void forward(Act& a, bool) override {
        Batch1d flat(a.planes.size());
        for (size_t s = 0; s < a.planes.size(); ++s) {
            const auto& planes = a.planes[s];
            const int h = int(planes[0].rows());
            in_cols_ = int(planes[0].cols());
            Mat y(long(planes.size()), h);
            for (size_t c = 0; c < planes.size(); ++c)
                y.row(long(c)) = planes[c].rowwise().mean().transpose();
            flat[s] = std::move(y);
        }
        a.flat = std::move(flat);
        a.planes.clear();
    }

    void backward(Act& g) override {
        Batch2d planes(g.flat.size());
        for (size_t s = 0; s < g.flat.size(); ++s) {
            const Mat& gy = g.flat[s]; // (channels x time)
            planes[s].resize(size_t(gy.rows()));
            for (long c = 0; c < gy.rows(); ++c)
                planes[s][size_t(c)] =
                    (gy.row(c).transpose() / float(in_cols_)) * Eigen::RowVectorXf::Ones(in_cols_);
        }
        g.planes = std::move(planes);
        g.flat.clear();
    }

private:
    int in_cols_ = 0;
};

class ResBlock : public Layer {
public:
    explicit ResBlock(std::vector<std::unique_ptr<Layer>> body) : body_(std::move(body)) {}

    void forward(Act& a, bool training) override {
        Act skip;
        skip.flat = a.flat;
        for (auto& l : body_) l->forward(a, training);
        for (size_t s = 0; s < a.flat.size(); ++s) a.flat[s] += skip.flat[s];
    }

    void backward(Act& g) override {
        Act skip;
        skip.flat = g.flat;
        for (auto it = body_.rbegin(); it != body_.rend(); ++it) (*it)->backward(g);
        for (size_t s = 0; s < g.flat.size(); ++s) g.flat[s] += skip.flat[s];
    }

    void collect(std::vector<ParamRef>& out) override {
        for (auto& l : body_) l->collect(out);
    }
    void collect_buffers(std::vector<std::pair<float*, long>>& out) override {
        for (auto& l : body_) l->collect_buffers(out);
    }

private:
    std::vector<std::unique_ptr<Layer>> body_;
};

} // namespace

Model::Model(const ModelSpec& spec, uint64_t seed) : spec_(spec) {
    std::mt19937_64 rng(seed);
    auto plan = spec.layer_plan();
    std::vector<std::unique_ptr<Layer>>* target = &layers_;
    std::vector<std::unique_ptr<Layer>> res_body;
    bool in_res = false;
    for (const auto& d : plan) {
        switch (d.kind) {
            case LayerKind::res_begin:
                in_res = true;
                target = &res_body;
                break;
            case LayerKind::res_end:
                in_res = false;
                target = &layers_;
                layers_.push_back(std::make_unique<ResBlock>(std::move(res_body)));
                res_body.clear();
                break;
            case LayerKind::conv1d:
                target->push_back(std::make_unique<Conv1d>(d.in_ch, d.out_ch, d.kernel, rng));
                break;
            case LayerKind::conv2d:
                target->push_back(std::make_unique<Conv2d>(d.in_ch, d.out_ch, d.kernel, rng));
                break;
            case LayerKind::batch_norm:
                target->push_back(std::make_unique<BatchNorm>(d.out_ch));
                break;
            case LayerKind::relu:
                target->push_back(std::make_unique<Relu>());
                break;
            case LayerKind::pool_freq2:
                target->push_back(std::make_unique<PoolFreq2>());
                break;
            case LayerKind::freq_avg:
                target->push_back(std::make_unique<FreqAvg>());
                break;
        }
    }
    if (in_res) throw std::logic_error("unterminated residual block in layer plan");
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Batch1d Model::forward(const std::vector<ModelInput>& inputs, bool training) {
    Act a;
    if (spec_.is_1d()) {
        a.flat.reserve(inputs.size());
        for (const auto& in : inputs) {
            if (in.flat.rows() != spec_.input_channels_1d() || in.flat.cols() != kFramesPerSegment)
                throw std::invalid_argument("model forward: input arrangement mismatch for " +
                                            variant_name(spec_.variant));
            a.flat.push_back(in.flat);
        }
    } else {
        a.planes.reserve(inputs.size());
        for (const auto& in : inputs) {
            if (in.planes.size() != 1 || in.planes[0].rows() != kFramesPerSegment ||
                in.planes[0].cols() != kPitchBins)
                throw std::invalid_argument("model forward: input arrangement mismatch for baseline2d");
            a.planes.push_back(in.planes);
        }
    }
    for (auto& l : layers_) l->forward(a, training);
    return std::move(a.flat); // (7 x 258) per sample
}

void Model::backward(const Batch1d& grad_logits) {
    Act g;
    g.flat = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) (*it)->backward(g);
}

std::vector<ParamRef> Model::parameters() {
    std::vector<ParamRef> out;
    for (auto& l : layers_) l->collect(out);
    return out;
}

void Model::zero_grad() {
    for (auto& p : parameters()) std::memset(p.grad, 0, size_t(p.size) * sizeof(float));
}

long Model::num_params() {
    long n = 0;
    for (auto& p : parameters()) n += p.size;
    return n;
}

std::vector<float> Model::state() const {
    auto* self = const_cast<Model*>(this);
    std::vector<float> out;
    for (auto& p : self->parameters()) out.insert(out.end(), p.value, p.value + p.size);
    std::vector<std::pair<float*, long>> bufs;
    for (auto& l : self->layers_) l->collect_buffers(bufs);
    for (auto& [ptr, n] : bufs) out.insert(out.end(), ptr, ptr + n);
    return out;
}

void Model::set_state(const std::vector<float>& state) {
    size_t pos = 0;
    for (auto& p : parameters()) {
        if (pos + size_t(p.size) > state.size()) throw std::invalid_argument("model state too short");
        std::memcpy(p.value, state.data() + pos, size_t(p.size) * sizeof(float));
        pos += size_t(p.size);
    }
    std::vector<std::pair<float*, long>> bufs;
    for (auto& l : layers_) l->collect_buffers(bufs);
    for (auto& [ptr, n] : bufs) {
        if (pos + size_t(n) > state.size()) throw std::invalid_argument("model state too short");
        std::memcpy(ptr, state.data() + pos, size_t(n) * sizeof(float));
        pos += size_t(n);
    }
    if (pos != state.size())
        throw std::invalid_argument("model state length mismatch: expected " + std::to_string(pos) +
                                    ", got " + std::to_string(state.size()));
}

Raster predict_roll(Model& model, const ModelInput& input) {
    Batch1d logits = model.forward({input}, false);
    Raster roll = logits[0].transpose(); // (258 x 7)
    roll = roll.unaryExpr([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
    return roll;
}

} // namespace fir::nets
