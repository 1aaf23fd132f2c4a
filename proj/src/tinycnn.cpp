#include "acm/tinycnn.hpp"

#include "acm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace acm {

void LayerPlan::validate() const {
    for (const int c : conv_maps)
        if (c < 1) throw ParamError("conv map counts must be >= 1");
    if (dense_units < 1) throw ParamError("dense_units must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ParamError("dropout_rate must be in [0, 1)");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ParamError("batch_size must be >= 1");
    if (epochs < 0) throw ParamError("epochs must be >= 0");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ParamError("val_fraction must be in (0, 1)");
    if (lr <= 0.0) throw ParamError("learning rate must be positive");
}

ShapeTrace plan_shapes(const LayerPlan& plan) {
    ShapeTrace t;
    int h = 28, w = 28, c = 1;
    t.stages.push_back({h, w, c});
    for (int k = 0; k < 3; ++k) {
        c = plan.conv_maps[k];
        t.stages.push_back({h, w, c}); // conv, same padding
        h /= 2;
        w /= 2;
        t.stages.push_back({h, w, c}); // pool, floor semantics
    }
    t.flat = h * w * c;
    t.dense = {plan.dense_units, plan.dense_units, 1};
    return t;
}

namespace {

std::vector<std::vector<int>> expected_shapes(const LayerPlan& plan) {
    const ShapeTrace t = plan_shapes(plan);
    const int c1 = plan.conv_maps[0], c2 = plan.conv_maps[1], c3 = plan.conv_maps[2];
    const int u = plan.dense_units;
    return {
        {c1, 1, 3, 3},  {c1},        // conv1
        {c2, c1, 3, 3}, {c2},        // conv2
        {c3, c2, 3, 3}, {c3},        // conv3
        {u, t.flat},    {u},         // fc1
        {u, u},         {u},         // fc2
        {1, u},         {1},         // head
    };
}

std::size_t shape_len(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void conv3x3_same(const double* in, int h, int w, int in_c, const double* wgt,
                  const double* bias, int out_c, double* out) {
    const int hw = h * w;
    for (int oc = 0; oc < out_c; ++oc) {
        double* o = out + static_cast<std::size_t>(oc) * hw;
        std::fill(o, o + hw, bias[oc]);
        for (int ic = 0; ic < in_c; ++ic) {
            const double* src = in + static_cast<std::size_t>(ic) * hw;
            const double* k = wgt + ((static_cast<std::size_t>(oc) * in_c + ic) * 9);
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double kv = k[ky * 3 + kx];
                    if (kv == 0.0) continue;
                    const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                    for (int y = y0; y < y1; ++y) {
                        const double* srow = src + (y + ky - 1) * w + (kx - 1);
                        double* orow = o + y * w;
                        for (int x = x0; x < x1; ++x) orow[x] += kv * srow[x];
                    }
                }
            }
        }
    }
}

// Accumulates weight/bias gradients and (optionally) input gradients.
void conv3x3_backward(const double* in, int h, int w, int in_c, const double* wgt, int out_c,
                      const double* dout, double* dwgt, double* dbias, double* din) {
    const int hw = h * w;
    for (int oc = 0; oc < out_c; ++oc) {
        const double* go = dout + static_cast<std::size_t>(oc) * hw;
        double acc_b = 0.0;
        for (int i = 0; i < hw; ++i) acc_b += go[i];
        dbias[oc] += acc_b;
        for (int ic = 0; ic < in_c; ++ic) {
            const double* src = in + static_cast<std::size_t>(ic) * hw;
            const std::size_t kbase = (static_cast<std::size_t>(oc) * in_c + ic) * 9;
            double* gsrc = din ? din + static_cast<std::size_t>(ic) * hw : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                    double acc_w = 0.0;
                    const double kv = wgt[kbase + ky * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        const double* srow = src + (y + ky - 1) * w + (kx - 1);
                        const double* grow = go + y * w;
                        for (int x = x0; x < x1; ++x) acc_w += grow[x] * srow[x];
                    }
                    dwgt[kbase + ky * 3 + kx] += acc_w;
                    if (gsrc) {
                        for (int y = y0; y < y1; ++y) {
                            double* drow = gsrc + (y + ky - 1) * w + (kx - 1);
                            const double* grow = go + y * w;
                            for (int x = x0; x < x1; ++x) drow[x] += grow[x] * kv;
                        }
                    }
                }
            }
        }
    }
}

// 2x2 max pool, stride 2, floor on odd sizes; ties keep the first value in
// row-major scan order. arg records the source index per output cell.
void maxpool2(const double* in, int h, int w, int c, double* out, int* arg) {
    const int oh = h / 2, ow = w / 2;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + static_cast<std::size_t>(ch) * h * w;
        double* o = out + static_cast<std::size_t>(ch) * oh * ow;
        int* a = arg + static_cast<std::size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int best_idx = (2 * y) * w + 2 * x;
                double best = src[best_idx];
                const int cand[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x,
                                     (2 * y + 1) * w + 2 * x + 1};
                for (const int idx : cand) {
                    if (src[idx] > best) {
                        best = src[idx];
                        best_idx = idx;
                    }
                }
                o[y * ow + x] = best;
                a[y * ow + x] = static_cast<int>(ch) * h * w + best_idx;
            }
        }
    }
}

void dense(const double* in, int n_in, const double* wgt, const double* bias, int n_out,
           double* out) {
    for (int j = 0; j < n_out; ++j) {
        const double* wr = wgt + static_cast<std::size_t>(j) * n_in;
        double acc = bias[j];
        for (int i = 0; i < n_in; ++i) acc += wr[i] * in[i];
        out[j] = acc;
    }
}

struct Acts {
    std::vector<double> input;                    // 28*28, normalized
    std::vector<double> conv_pre[3], conv_post[3]; // pre/post ReLU
    std::vector<double> pool_out[3];
    std::vector<int> pool_arg[3];
    std::vector<double> fc1_pre, fc1_post, fc2_pre, fc2_post, dropped;
    double logit = 0.0;
    double p = 0.5;
};

void check_model(const CnnModel& model) {
    const auto want = expected_shapes(model.plan);
    if (model.weights.size() != want.size())
        throw ModelError("model has " + std::to_string(model.weights.size()) +
                         " tensors, plan requires " + std::to_string(want.size()));
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (model.weights[i].shape != want[i] ||
            model.weights[i].v.size() != shape_len(want[i]))
            throw ModelError("weight tensor " + std::to_string(i) + " shape mismatch vs plan");
    }
}

void run_forward(const CnnModel& model, const GrayImage& patch,
                 const std::vector<double>* mask, Acts& a) {
    if (patch.width != 28 || patch.height != 28)
        throw ModelError("forward expects a 28x28 patch, got " + std::to_string(patch.width) +
                         "x" + std::to_string(patch.height));
    check_model(model);
    const LayerPlan& plan = model.plan;

    a.input.resize(28 * 28);
    for (int i = 0; i < 28 * 28; ++i) a.input[i] = patch.data[i] / 255.0;

    int h = 28, w = 28, in_c = 1;
    const double* cur = a.input.data();
    for (int k = 0; k < 3; ++k) {
        const int out_c = plan.conv_maps[k];
        a.conv_pre[k].assign(static_cast<std::size_t>(h) * w * out_c, 0.0);
        conv3x3_same(cur, h, w, in_c, model.weights[2 * k].v.data(),
                     model.weights[2 * k + 1].v.data(), out_c, a.conv_pre[k].data());
        a.conv_post[k] = a.conv_pre[k];
        for (auto& v : a.conv_post[k]) v = std::max(v, 0.0);
        const int oh = h / 2, ow = w / 2;
        a.pool_out[k].assign(static_cast<std::size_t>(oh) * ow * out_c, 0.0);
        a.pool_arg[k].assign(static_cast<std::size_t>(oh) * ow * out_c, 0);
        maxpool2(a.conv_post[k].data(), h, w, out_c, a.pool_out[k].data(),
                 a.pool_arg[k].data());
        h = oh;
        w = ow;
        in_c = out_c;
        cur = a.pool_out[k].data();
    }

    const int flat = h * w * in_c;
    const int units = plan.dense_units;
    a.fc1_pre.assign(units, 0.0);
    dense(cur, flat, model.weights[6].v.data(), model.weights[7].v.data(), units,
          a.fc1_pre.data());
    a.fc1_post = a.fc1_pre;
    for (auto& v : a.fc1_post) v = std::max(v, 0.0);

    a.fc2_pre.assign(units, 0.0);
    dense(a.fc1_post.data(), units, model.weights[8].v.data(), model.weights[9].v.data(), units,
          a.fc2_pre.data());
    a.fc2_post = a.fc2_pre;
    for (auto& v : a.fc2_post) v = std::max(v, 0.0);

    a.dropped = a.fc2_post;
    if (mask) {
        if (static_cast<int>(mask->size()) != units)
            throw ModelError("dropout mask size mismatch");
        for (int j = 0; j < units; ++j) a.dropped[j] *= (*mask)[j];
    }

    double logit = model.weights[11].v[0];
    const double* hw_ = model.weights[10].v.data();
    for (int j = 0; j < units; ++j) logit += hw_[j] * a.dropped[j];
    a.logit = logit;
    a.p = sigmoid(logit);
}

std::vector<double> draw_mask(const LayerPlan& plan, Rng& rng) {
    std::vector<double> mask(plan.dense_units);
    const double keep_scale = 1.0 / (1.0 - plan.dropout_rate);
    for (auto& m : mask) m = rng.uniform() < plan.dropout_rate ? 0.0 : keep_scale;
    return mask;
}

} // namespace

CnnModel make_model(const LayerPlan& plan, std::uint64_t seed) {
    plan.validate();
    CnnModel m;
    m.plan = plan;
    m.rng_seed = seed;
    Rng rng(seed);
    const auto shapes = expected_shapes(plan);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        Tensor t;
        t.shape = shapes[i];
        t.v.assign(shape_len(shapes[i]), 0.0);
        const bool is_weight = shapes[i].size() > 1;
        if (is_weight) {
            const bool is_head = i == 10;
            double limit;
            if (shapes[i].size() == 4) {
                const int fan_in = shapes[i][1] * 9;
                limit = std::sqrt(6.0 / fan_in);
            } else if (is_head) {
                limit = std::sqrt(6.0 / (shapes[i][1] + 1)); // Glorot for sigmoid
            } else {
                limit = std::sqrt(6.0 / shapes[i][1]); // He for ReLU
            }
            for (auto& v : t.v) v = rng.uniform(-limit, limit);
        }
        m.weights.push_back(std::move(t));
    }
    return m;
}

double forward(const CnnModel& model, const GrayImage& patch, bool train_mode, Rng* rng) {
    Acts a;
    if (train_mode) {
        if (!rng) throw ParamError("train-mode forward needs an rng for the dropout mask");
        const auto mask = draw_mask(model.plan, *rng);
        run_forward(model, patch, &mask, a);
    } else {
        run_forward(model, patch, nullptr, a);
    }
    return a.p;
}

double loss_bce(double pred, int label) {
    const double p = std::clamp(pred, 1e-7, 1.0 - 1e-7);
    return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

std::vector<Tensor> backward(const CnnModel& model, const std::vector<TrainSample>& batch,
                             const std::vector<double>* dropout_mask, double* mean_loss) {
    if (batch.empty()) throw ParamError("backward needs a nonempty batch");
    check_model(model);
    const LayerPlan& plan = model.plan;
    const int units = plan.dense_units;

    std::vector<Tensor> grads;
    for (const auto& t : model.weights) {
        Tensor g;
        g.shape = t.shape;
        g.v.assign(t.v.size(), 0.0);
        grads.push_back(std::move(g));
    }

    double loss_sum = 0.0;
    Acts a;
    for (const auto& sample : batch) {
        run_forward(model, sample.patch, dropout_mask, a);
        loss_sum += loss_bce(a.p, sample.label);

        // Sigmoid + BCE collapse to p - y at the logit (the loss clamp only
        // guards the log evaluation).
        const double dz = a.p - static_cast<double>(sample.label);

        std::vector<double> d_dropped(units);
        grads[11].v[0] += dz;
        for (int j = 0; j < units; ++j) {
            grads[10].v[j] += dz * a.dropped[j];
            d_dropped[j] = dz * model.weights[10].v[j];
        }
        if (dropout_mask)
            for (int j = 0; j < units; ++j) d_dropped[j] *= (*dropout_mask)[j];

        std::vector<double> d_fc2_pre(units);
        for (int j = 0; j < units; ++j)
            d_fc2_pre[j] = a.fc2_pre[j] > 0.0 ? d_dropped[j] : 0.0;

        const int flat = static_cast<int>(a.pool_out[2].size());
        std::vector<double> d_fc1_post(units, 0.0);
        for (int j = 0; j < units; ++j) {
            const double g = d_fc2_pre[j];
            grads[9].v[j] += g;
            if (g == 0.0) continue;
            const double* wr = model.weights[8].v.data() + static_cast<std::size_t>(j) * units;
            double* gw = grads[8].v.data() + static_cast<std::size_t>(j) * units;
            for (int i = 0; i < units; ++i) {
                gw[i] += g * a.fc1_post[i];
                d_fc1_post[i] += g * wr[i];
            }
        }

        std::vector<double> d_fc1_pre(units);
        for (int j = 0; j < units; ++j)
            d_fc1_pre[j] = a.fc1_pre[j] > 0.0 ? d_fc1_post[j] : 0.0;

        std::vector<double> d_flat(flat, 0.0);
        for (int j = 0; j < units; ++j) {
            const double g = d_fc1_pre[j];
            grads[7].v[j] += g;
            if (g == 0.0) continue;
            const double* wr = model.weights[6].v.data() + static_cast<std::size_t>(j) * flat;
            double* gw = grads[6].v.data() + static_cast<std::size_t>(j) * flat;
            const double* fin = a.pool_out[2].data();
            for (int i = 0; i < flat; ++i) {
                gw[i] += g * fin[i];
                d_flat[i] += g * wr[i];
            }
        }

        // Back through the three conv/pool stages.
        std::vector<double> d_pool = std::move(d_flat);
        for (int k = 2; k >= 0; --k) {
            const int out_c = plan.conv_maps[k];
            const int h = 28 >> k, w = 28 >> k; // conv-stage spatial size
            std::vector<double> d_relu(static_cast<std::size_t>(h) * w * out_c, 0.0);
            for (std::size_t i = 0; i < d_pool.size(); ++i)
                d_relu[a.pool_arg[k][i]] += d_pool[i];
            for (std::size_t i = 0; i < d_relu.size(); ++i)
                if (a.conv_pre[k][i] <= 0.0) d_relu[i] = 0.0;

            const int in_c = k == 0 ? 1 : plan.conv_maps[k - 1];
            const double* in = k == 0 ? a.input.data() : a.pool_out[k - 1].data();
            std::vector<double> d_in;
            if (k > 0) d_in.assign(static_cast<std::size_t>(h) * w * in_c, 0.0);
            conv3x3_backward(in, h, w, in_c, model.weights[2 * k].v.data(), out_c,
                             d_relu.data(), grads[2 * k].v.data(), grads[2 * k + 1].v.data(),
                             k > 0 ? d_in.data() : nullptr);
            d_pool = std::move(d_in);
        }
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grads)
        for (auto& v : g.v) v *= inv_n;
    if (mean_loss) *mean_loss = loss_sum * inv_n;
    return grads;
}

void adam_step(std::vector<Tensor>& weights, const std::vector<Tensor>& grads,
               std::vector<Tensor>& m_state, std::vector<Tensor>& v_state, long step,
               const TrainConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t t = 0; t < grads.size(); ++t) {
        double* w = weights[t].v.data();
        double* m = m_state[t].v.data();
        double* v = v_state[t].v.data();
        const double* g = grads[t].v.data();
        const std::size_t len = grads[t].v.size();
        for (std::size_t i = 0; i < len; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

CnnModel train(const CnnModel& model, const std::vector<TrainSample>& samples,
               const TrainConfig& cfg) {
    cfg.validate();
    check_model(model);
    bool has_pos = false, has_neg = false;
    for (const auto& s : samples) (s.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw TrainingError("training set must contain both classes");

    CnnModel out = model;
    Rng rng(cfg.seed);

    const int n = static_cast<int>(samples.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const int val_count = static_cast<int>(n * cfg.val_fraction);
    std::vector<int> train_idx(idx.begin(), idx.end() - val_count);
    std::vector<int> val_idx(idx.end() - val_count, idx.end());
    if (train_idx.empty()) throw TrainingError("no training samples left after split");

    std::vector<Tensor> m_state, v_state;
    for (const auto& t : out.weights) {
        Tensor z;
        z.shape = t.shape;
        z.v.assign(t.v.size(), 0.0);
        m_state.push_back(z);
        v_state.push_back(std::move(z));
    }

    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double loss_acc = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(train_idx.size(),
                                             start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TrainSample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(samples[train_idx[i]]);

            const auto mask = draw_mask(out.plan, rng);
            double batch_loss = 0.0;
            const auto grads = backward(out, batch, &mask, &batch_loss);
            loss_acc += batch_loss * static_cast<double>(batch.size());

            adam_step(out.weights, grads, m_state, v_state, ++step, cfg);
        }

        EpochStats st;
        st.train_loss = loss_acc / static_cast<double>(train_idx.size());
        // Empty validation split falls back to the training set for reporting.
        const std::vector<int>& eval_idx = val_idx.empty() ? train_idx : val_idx;
        double vloss = 0.0;
        long correct = 0;
        for (const int i : eval_idx) {
            const double p = forward(out, samples[i].patch, false, nullptr);
            vloss += loss_bce(p, samples[i].label);
            if ((p >= 0.5 ? 1 : 0) == samples[i].label) ++correct;
        }
        st.val_loss = vloss / static_cast<double>(eval_idx.size());
        st.val_acc = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
        out.meta.history.push_back(st);
    }
    out.meta.epochs_run = static_cast<int>(out.meta.history.size());
    return out;
}

// --- serialization ---------------------------------------------------------

namespace {

void put_u32(std::ostream& o, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    o.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& o, std::uint64_t v) {
    put_u32(o, static_cast<std::uint32_t>(v));
    put_u32(o, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& o, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(o, v);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ModelError(path + ": truncated model file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
    const std::uint64_t lo = get_u32(in, path);
    const std::uint64_t hi = get_u32(in, path);
    return lo | (hi << 32);
}

float get_f32(std::istream& in, const std::string& path) {
    const std::uint32_t v = get_u32(in, path);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

} // namespace

void save_model(const CnnModel& model, const std::string& path) {
    check_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError(path + ": cannot open for writing");
    out.write("ACM1", 4);
    put_u32(out, 1); // version
    for (const int c : model.plan.conv_maps) put_u32(out, static_cast<std::uint32_t>(c));
    put_u32(out, static_cast<std::uint32_t>(model.plan.dense_units));
    put_f32(out, static_cast<float>(model.plan.dropout_rate));
    put_u64(out, model.rng_seed);
    put_u32(out, static_cast<std::uint32_t>(model.meta.epochs_run));
    put_u32(out, static_cast<std::uint32_t>(model.meta.history.size()));
    for (const auto& st : model.meta.history) {
        put_f32(out, static_cast<float>(st.train_loss));
        put_f32(out, static_cast<float>(st.val_loss));
        put_f32(out, static_cast<float>(st.val_acc));
    }
    put_u32(out, static_cast<std::uint32_t>(model.weights.size()));
    for (const auto& t : model.weights) {
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (const int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (const double v : t.v) put_f32(out, static_cast<float>(v));
    }
    if (!out) throw ModelError(path + ": write failed");
}

CnnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "ACM1", 4) != 0)
        throw ModelError(path + ": bad magic, expected \"ACM1\"");
    const std::uint32_t version = get_u32(in, path);
    if (version != 1)
        throw ModelError(path + ": unsupported version " + std::to_string(version));

    CnnModel m;
    for (int k = 0; k < 3; ++k) m.plan.conv_maps[k] = static_cast<int>(get_u32(in, path));
    m.plan.dense_units = static_cast<int>(get_u32(in, path));
    m.plan.dropout_rate = get_f32(in, path);
    m.rng_seed = get_u64(in, path);
    m.plan.validate();
    m.meta.epochs_run = static_cast<int>(get_u32(in, path));
    const std::uint32_t hist = get_u32(in, path);
    for (std::uint32_t i = 0; i < hist; ++i) {
        EpochStats st;
        st.train_loss = get_f32(in, path);
        st.val_loss = get_f32(in, path);
        st.val_acc = get_f32(in, path);
        m.meta.history.push_back(st);
    }

    const std::uint32_t count = get_u32(in, path);
    const auto want = expected_shapes(m.plan);
    if (count != want.size())
        throw ModelError(path + ": tensor count mismatch vs plan");
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor t;
        const std::uint32_t ndim = get_u32(in, path);
        if (ndim > 4) throw ModelError(path + ": invalid tensor rank");
        for (std::uint32_t d = 0; d < ndim; ++d)
            t.shape.push_back(static_cast<int>(get_u32(in, path)));
        if (t.shape != want[i]) throw ModelError(path + ": tensor shape mismatch vs plan");
        t.v.resize(shape_len(t.shape));
        for (auto& v : t.v) v = get_f32(in, path);
        m.weights.push_back(std::move(t));
    }
    return m;
}

void write_train_log(const CnnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "epoch,train_loss,val_loss,val_acc\n";
    char line[128];
    for (std::size_t i = 0; i < model.meta.history.size(); ++i) {
        const auto& st = model.meta.history[i];
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", i + 1, st.train_loss,
                      st.val_loss, st.val_acc);
        out << line;
    }
    if (!out) throw FormatError(path + ": write failed");
}

} // namespace acm
