// Trainable models: 1D-convolutional feature extractor (valid padding,
// global max pooling to a 96-dim embedding), dense classification head,
// mirrored upsampling decoder for the autoencoder baseline, and the
// optimizers. Templated on scalar so training runs float and gradient
// checks run double.
//
// Forward passes write their intermediates into explicit context objects;
// backward reads them back. This keeps parameters shared across the several
// per-step forwards of contrastive training (anchor, positive, negatives)
// with per-role caches.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "collossl/common.hpp"

namespace collossl::nn {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
    std::vector<std::int64_t> shape;
    bool conv_kernel = false;  // L2 regularization applies to these only
};

template <typename T>
void zero_gradients(const std::vector<ParamRef<T>>& params) {
    for (const auto& p : params) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

// Uniform Glorot-style init; draws in double so float and double
// instantiations see identical values.
template <typename T>
void glorot_fill(std::vector<T>& w, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& x : w) x = static_cast<T>(u(rng));
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

// Rows of the batch matrix are windows flattened time-major: index = t*C + c.
// im2col turns convolution into one GEMM per layer.
template <typename T>
struct Conv1d {
    int in_ch = 0, out_ch = 0, kernel = 0;
    int pad_left = 0, pad_right = 0;
    std::vector<T> weight;  // [kernel*in_ch, out_ch], row = tap*in_ch + cin
    std::vector<T> bias;    // [out_ch]
    std::vector<T> gweight, gbias;

    struct Cache {
        MatX<T> cols;  // [B*w_out, kernel*in_ch]
        Eigen::Index batch = 0;
        std::int64_t w_in = 0;
    };

    void configure(int in_channels, int out_channels, int kernel_size, bool same_padding = false) {
        in_ch = in_channels;
        out_ch = out_channels;
        kernel = kernel_size;
        if (same_padding) {
            pad_left = (kernel - 1) / 2;
            pad_right = kernel - 1 - pad_left;
        }
        weight.assign(static_cast<size_t>(kernel) * in_ch * out_ch, T(0));
        bias.assign(static_cast<size_t>(out_ch), T(0));
        gweight.assign(weight.size(), T(0));
        gbias.assign(bias.size(), T(0));
    }

    void init(Rng& rng) {
        glorot_fill(weight, static_cast<std::int64_t>(kernel) * in_ch,
                    static_cast<std::int64_t>(kernel) * out_ch, rng);
        std::fill(bias.begin(), bias.end(), T(0));
    }

    std::int64_t out_len(std::int64_t w_in) const {
        return w_in + pad_left + pad_right - kernel + 1;
    }

    MatX<T> forward(const MatX<T>& x, std::int64_t w_in, Cache& cache) const {
        const Eigen::Index batch = x.rows();
        const std::int64_t w_out = out_len(w_in);
        if (w_out < 1) {
            throw ConfigError("conv window too short: input length " + std::to_string(w_in) +
                              " < kernel " + std::to_string(kernel));
        }
        cache.batch = batch;
        cache.w_in = w_in;
        cache.cols.setZero(batch * w_out, static_cast<Eigen::Index>(kernel) * in_ch);
        for (Eigen::Index b = 0; b < batch; ++b) {
            const T* row = x.row(b).data();
            for (std::int64_t t = 0; t < w_out; ++t) {
                T* dst = cache.cols.row(b * w_out + t).data();
                for (int k = 0; k < kernel; ++k) {
                    const std::int64_t src_t = t + k - pad_left;
                    if (src_t < 0 || src_t >= w_in) continue;
                    const T* src = row + src_t * in_ch;
                    std::copy(src, src + in_ch, dst + static_cast<std::int64_t>(k) * in_ch);
                }
            }
        }
        Eigen::Map<const MatX<T>> wmat(weight.data(), static_cast<Eigen::Index>(kernel) * in_ch,
                                       out_ch);
        MatX<T> flat = cache.cols * wmat;
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data(), out_ch);
        flat.rowwise() += bvec.transpose();
        // Reinterpret [B*w_out, out_ch] as [B, w_out*out_ch]; same storage.
        return Eigen::Map<const MatX<T>>(flat.data(), batch, w_out * out_ch);
    }

    MatX<T> backward(const MatX<T>& dy, const Cache& cache) {
        const Eigen::Index batch = cache.batch;
        const std::int64_t w_out = out_len(cache.w_in);
        Eigen::Map<const MatX<T>> dym(dy.data(), batch * w_out, out_ch);

        Eigen::Map<MatX<T>> gw(gweight.data(), static_cast<Eigen::Index>(kernel) * in_ch, out_ch);
        gw.noalias() += cache.cols.transpose() * dym;
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(gbias.data(), out_ch);
        gb.noalias() += dym.colwise().sum().transpose();

        Eigen::Map<const MatX<T>> wmat(weight.data(), static_cast<Eigen::Index>(kernel) * in_ch,
                                       out_ch);
        MatX<T> dcols = dym * wmat.transpose();

        MatX<T> dx = MatX<T>::Zero(batch, cache.w_in * in_ch);
        for (Eigen::Index b = 0; b < batch; ++b) {
            T* drow = dx.row(b).data();
            for (std::int64_t t = 0; t < w_out; ++t) {
                const T* src = dcols.row(b * w_out + t).data();
                for (int k = 0; k < kernel; ++k) {
                    const std::int64_t dst_t = t + k - pad_left;
                    if (dst_t < 0 || dst_t >= cache.w_in) continue;
                    T* dst = drow + dst_t * in_ch;
                    const T* s = src + static_cast<std::int64_t>(k) * in_ch;
                    for (int c = 0; c < in_ch; ++c) dst[c] += s[c];
                }
            }
        }
        return dx;
    }

    std::vector<ParamRef<T>> params(const std::string& prefix) {
        return {{prefix + ".weight", &weight, &gweight,
                 {kernel, in_ch, out_ch}, true},
                {prefix + ".bias", &bias, &gbias, {out_ch}, false}};
    }
};

template <typename T>
struct Dense {
    int in_dim = 0, out_dim = 0;
    std::vector<T> weight;  // [in_dim, out_dim]
    std::vector<T> bias;
    std::vector<T> gweight, gbias;

    struct Cache {
        MatX<T> x;
    };

    void configure(int in, int out) {
        in_dim = in;
        out_dim = out;
        weight.assign(static_cast<size_t>(in) * out, T(0));
        bias.assign(static_cast<size_t>(out), T(0));
        gweight.assign(weight.size(), T(0));
        gbias.assign(bias.size(), T(0));
    }

    void init(Rng& rng) {
        glorot_fill(weight, in_dim, out_dim, rng);
        std::fill(bias.begin(), bias.end(), T(0));
    }

    MatX<T> forward(const MatX<T>& x, Cache& cache) const {
        cache.x = x;
        Eigen::Map<const MatX<T>> wmat(weight.data(), in_dim, out_dim);
        MatX<T> y = x * wmat;
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data(), out_dim);
        y.rowwise() += bvec.transpose();
        return y;
    }

    MatX<T> backward(const MatX<T>& dy, const Cache& cache) {
        Eigen::Map<MatX<T>> gw(gweight.data(), in_dim, out_dim);
        gw.noalias() += cache.x.transpose() * dy;
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(gbias.data(), out_dim);
        gb.noalias() += dy.colwise().sum().transpose();
        Eigen::Map<const MatX<T>> wmat(weight.data(), in_dim, out_dim);
        return dy * wmat.transpose();
    }

    std::vector<ParamRef<T>> params(const std::string& prefix) {
        return {{prefix + ".weight", &weight, &gweight, {in_dim, out_dim}, false},
                {prefix + ".bias", &bias, &gbias, {out_dim}, false}};
    }
};

template <typename T>
struct ReluCache {
    std::vector<char> mask;
};

template <typename T>
MatX<T> relu_forward(const MatX<T>& x, ReluCache<T>& cache) {
    cache.mask.assign(static_cast<size_t>(x.size()), 0);
    MatX<T> y = x;
    T* data = y.data();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (data[i] > T(0)) {
            cache.mask[static_cast<size_t>(i)] = 1;
        } else {
            data[i] = T(0);
        }
    }
    return y;
}

template <typename T>
MatX<T> relu_backward(const MatX<T>& dy, const ReluCache<T>& cache) {
    MatX<T> dx = dy;
    T* data = dx.data();
    for (Eigen::Index i = 0; i < dx.size(); ++i) {
        if (!cache.mask[static_cast<size_t>(i)]) data[i] = T(0);
    }
    return dx;
}

// Inverted dropout; eval mode is the identity.
template <typename T>
struct DropoutCache {
    std::vector<T> scale;
    bool active = false;
};

template <typename T>
MatX<T> dropout_forward(const MatX<T>& x, double rate, bool train, Rng& rng,
                        DropoutCache<T>& cache) {
    if (!train || rate <= 0.0) {
        cache.active = false;
        return x;
    }
    cache.active = true;
    cache.scale.assign(static_cast<size_t>(x.size()), T(0));
    const T keep_scale = T(1.0 / (1.0 - rate));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatX<T> y = x;
    T* data = y.data();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (u(rng) < rate) {
            data[i] = T(0);
        } else {
            data[i] *= keep_scale;
            cache.scale[static_cast<size_t>(i)] = keep_scale;
        }
    }
    return y;
}

template <typename T>
MatX<T> dropout_backward(const MatX<T>& dy, const DropoutCache<T>& cache) {
    if (!cache.active) return dy;
    MatX<T> dx = dy;
    T* data = dx.data();
    for (Eigen::Index i = 0; i < dx.size(); ++i) {
        data[i] *= cache.scale[static_cast<size_t>(i)];
    }
    return dx;
}

// Global max pooling over the time axis: [B, Wt*C] -> [B, C].
struct GmpCache {
    std::vector<std::int32_t> argmax;  // [B*C]
    std::int64_t time_len = 0;
    int channels = 0;
};

template <typename T>
MatX<T> global_max_pool(const MatX<T>& x, std::int64_t time_len, int channels, GmpCache& cache) {
    const Eigen::Index batch = x.rows();
    cache.time_len = time_len;
    cache.channels = channels;
    cache.argmax.assign(static_cast<size_t>(batch) * channels, 0);
    MatX<T> y(batch, channels);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const T* row = x.row(b).data();
        for (int c = 0; c < channels; ++c) {
            T best = row[c];
            std::int32_t best_t = 0;
            for (std::int64_t t = 1; t < time_len; ++t) {
                const T v = row[t * channels + c];
                if (v > best) {
                    best = v;
                    best_t = static_cast<std::int32_t>(t);
                }
            }
            y(b, c) = best;
            cache.argmax[static_cast<size_t>(b) * channels + c] = best_t;
        }
    }
    return y;
}

template <typename T>
MatX<T> global_max_pool_backward(const MatX<T>& dy, const GmpCache& cache) {
    const Eigen::Index batch = dy.rows();
    MatX<T> dx = MatX<T>::Zero(batch, cache.time_len * cache.channels);
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (int c = 0; c < cache.channels; ++c) {
            const auto t = cache.argmax[static_cast<size_t>(b) * cache.channels + c];
            dx(b, static_cast<Eigen::Index>(t) * cache.channels + c) += dy(b, c);
        }
    }
    return dx;
}

// Linear-interpolation resize along time (align-corners mapping); used by
// the decoder to invert the encoder's length pipeline.
template <typename T>
MatX<T> upsample_linear(const MatX<T>& x, std::int64_t w_in, std::int64_t w_out, int channels) {
    const Eigen::Index batch = x.rows();
    MatX<T> y(batch, w_out * channels);
    for (std::int64_t t = 0; t < w_out; ++t) {
        const double pos = w_out > 1
                               ? static_cast<double>(t) * static_cast<double>(w_in - 1) /
                                     static_cast<double>(w_out - 1)
                               : 0.0;
        const auto lo = static_cast<std::int64_t>(pos);
        const std::int64_t hi = std::min(lo + 1, w_in - 1);
        const T frac = static_cast<T>(pos - static_cast<double>(lo));
        for (Eigen::Index b = 0; b < batch; ++b) {
            const T* row = x.row(b).data();
            T* out = y.row(b).data();
            for (int c = 0; c < channels; ++c) {
                out[t * channels + c] = (T(1) - frac) * row[lo * channels + c] +
                                        frac * row[hi * channels + c];
            }
        }
    }
    return y;
}

template <typename T>
MatX<T> upsample_linear_backward(const MatX<T>& dy, std::int64_t w_in, std::int64_t w_out,
                                 int channels) {
    const Eigen::Index batch = dy.rows();
    MatX<T> dx = MatX<T>::Zero(batch, w_in * channels);
    for (std::int64_t t = 0; t < w_out; ++t) {
        const double pos = w_out > 1
                               ? static_cast<double>(t) * static_cast<double>(w_in - 1) /
                                     static_cast<double>(w_out - 1)
                               : 0.0;
        const auto lo = static_cast<std::int64_t>(pos);
        const std::int64_t hi = std::min(lo + 1, w_in - 1);
        const T frac = static_cast<T>(pos - static_cast<double>(lo));
        for (Eigen::Index b = 0; b < batch; ++b) {
            const T* src = dy.row(b).data();
            T* out = dx.row(b).data();
            for (int c = 0; c < channels; ++c) {
                out[lo * channels + c] += (T(1) - frac) * src[t * channels + c];
                out[hi * channels + c] += frac * src[t * channels + c];
            }
        }
    }
    return dx;
}

template <typename T>
MatX<T> softmax(const MatX<T>& logits) {
    MatX<T> probs = logits;
    for (Eigen::Index b = 0; b < probs.rows(); ++b) {
        const T max_logit = probs.row(b).maxCoeff();
        probs.row(b) = (probs.row(b).array() - max_logit).exp();
        probs.row(b) /= probs.row(b).sum();
    }
    return probs;
}

// ---------------------------------------------------------------------------
// Feature extractor
// ---------------------------------------------------------------------------

struct ExtractorConfig {
    int in_channels = 6;
    int conv1_filters = 32, conv1_kernel = 24;
    int conv2_filters = 64, conv2_kernel = 16;
    int conv3_filters = 96, conv3_kernel = 8;
    double dropout_rate = 0.1;
    double l2 = 1e-4;

    // Valid convolutions shave kernel-1 samples per layer.
    std::int64_t min_window_len() const {
        return conv1_kernel + conv2_kernel + conv3_kernel - 2;
    }
    int embedding_dim() const { return conv3_filters; }

    std::string signature() const {
        return "cnn1d:" + std::to_string(in_channels) + ">" + std::to_string(conv1_filters) + "k" +
               std::to_string(conv1_kernel) + ">" + std::to_string(conv2_filters) + "k" +
               std::to_string(conv2_kernel) + ">" + std::to_string(conv3_filters) + "k" +
               std::to_string(conv3_kernel) + ":gmp";
    }
};

template <typename T>
struct FeatureExtractor {
    ExtractorConfig cfg;
    Conv1d<T> conv1, conv2, conv3;

    struct Ctx {
        typename Conv1d<T>::Cache c1, c2, c3;
        ReluCache<T> r1, r2, r3;
        DropoutCache<T> d1, d2;
        GmpCache gmp;
    };

    explicit FeatureExtractor(const ExtractorConfig& config = {}) : cfg(config) {
        conv1.configure(cfg.in_channels, cfg.conv1_filters, cfg.conv1_kernel);
        conv2.configure(cfg.conv1_filters, cfg.conv2_filters, cfg.conv2_kernel);
        conv3.configure(cfg.conv2_filters, cfg.conv3_filters, cfg.conv3_kernel);
    }

    void init(std::uint64_t seed) {
        auto rng = make_rng(seed, "extractor_init");
        conv1.init(rng);
        conv2.init(rng);
        conv3.init(rng);
    }

    MatX<T> forward(const MatX<T>& x, std::int64_t window_len, bool train, Rng& rng,
                    Ctx& ctx) const {
        if (window_len < cfg.min_window_len()) {
            throw ConfigError("window length " + std::to_string(window_len) +
                              " below minimum " + std::to_string(cfg.min_window_len()));
        }
        const std::int64_t w1 = conv1.out_len(window_len);
        const std::int64_t w2 = conv2.out_len(w1);
        const std::int64_t w3 = conv3.out_len(w2);

        MatX<T> h = conv1.forward(x, window_len, ctx.c1);
        h = relu_forward(h, ctx.r1);
        h = dropout_forward(h, cfg.dropout_rate, train, rng, ctx.d1);
        h = conv2.forward(h, w1, ctx.c2);
        h = relu_forward(h, ctx.r2);
        h = dropout_forward(h, cfg.dropout_rate, train, rng, ctx.d2);
        h = conv3.forward(h, w2, ctx.c3);
        h = relu_forward(h, ctx.r3);
        return global_max_pool(h, w3, cfg.conv3_filters, ctx.gmp);
    }

    MatX<T> backward(const MatX<T>& dembedding, Ctx& ctx) {
        MatX<T> d = global_max_pool_backward(dembedding, ctx.gmp);
        d = relu_backward(d, ctx.r3);
        d = conv3.backward(d, ctx.c3);
        d = dropout_backward(d, ctx.d2);
        d = relu_backward(d, ctx.r2);
        d = conv2.backward(d, ctx.c2);
        d = dropout_backward(d, ctx.d1);
        d = relu_backward(d, ctx.r1);
        return conv1.backward(d, ctx.c1);
    }

    std::vector<ParamRef<T>> params(const std::string& prefix = "ext") {
        std::vector<ParamRef<T>> out;
        for (auto& p : conv1.params(prefix + ".conv1")) out.push_back(p);
        for (auto& p : conv2.params(prefix + ".conv2")) out.push_back(p);
        for (auto& p : conv3.params(prefix + ".conv3")) out.push_back(p);
        return out;
    }
};

// L2 penalty over the conv kernels flagged trainable; gradient contribution
// is 2*lambda*w.
template <typename T>
double l2_penalty(const std::vector<ParamRef<T>>& params, const std::vector<char>& trainable,
                  double lambda) {
    double total = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].conv_kernel || !trainable[i]) continue;
        for (const T w : *params[i].value) total += static_cast<double>(w) * static_cast<double>(w);
    }
    return lambda * total;
}

template <typename T>
void add_l2_gradients(const std::vector<ParamRef<T>>& params, const std::vector<char>& trainable,
                      double lambda) {
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].conv_kernel || !trainable[i]) continue;
        auto& value = *params[i].value;
        auto& grad = *params[i].grad;
        for (size_t k = 0; k < value.size(); ++k) {
            grad[k] += T(2.0 * lambda) * value[k];
        }
    }
}

// ---------------------------------------------------------------------------
// Classifier head and decoder
// ---------------------------------------------------------------------------

template <typename T>
struct ClassifierHead {
    int embedding_dim = 96;
    int hidden_units = 1024;
    int num_classes = 0;
    Dense<T> dense1, dense2;

    struct Ctx {
        typename Dense<T>::Cache fc1, fc2;
        ReluCache<T> relu;
        MatX<T> probs;
    };

    void configure(int embedding, int classes, int hidden = 1024) {
        embedding_dim = embedding;
        num_classes = classes;
        hidden_units = hidden;
        dense1.configure(embedding, hidden);
        dense2.configure(hidden, classes);
    }

    void init(std::uint64_t seed) {
        auto rng = make_rng(seed, "head_init");
        dense1.init(rng);
        dense2.init(rng);
    }

    MatX<T> forward_probs(const MatX<T>& embeddings, Ctx& ctx) const {
        MatX<T> h = dense1.forward(embeddings, ctx.fc1);
        h = relu_forward(h, ctx.relu);
        h = dense2.forward(h, ctx.fc2);
        ctx.probs = softmax(h);
        return ctx.probs;
    }

    // dlogits = d loss / d pre-softmax logits (the fused softmax +
    // cross-entropy gradient is (probs - onehot)/B).
    MatX<T> backward_from_dlogits(const MatX<T>& dlogits, Ctx& ctx) {
        MatX<T> d = dense2.backward(dlogits, ctx.fc2);
        d = relu_backward(d, ctx.relu);
        return dense1.backward(d, ctx.fc1);
    }

    std::vector<ParamRef<T>> params(const std::string& prefix = "head") {
        std::vector<ParamRef<T>> out;
        for (auto& p : dense1.params(prefix + ".fc1")) out.push_back(p);
        for (auto& p : dense2.params(prefix + ".fc2")) out.push_back(p);
        return out;
    }
};

// Mirrors the encoder: dense expansion to the encoder's shortest time
// length, then upsample+conv stages walking the channel widths back down,
// ending in a linear conv to the input channel count.
template <typename T>
struct Decoder {
    std::int64_t w0 = 0, w1 = 0, w2 = 0, w3 = 0;  // encoder time lengths, w0 = input W
    int ch_in = 96, ch_a = 64, ch_b = 32, out_ch = 6;
    Dense<T> expand;
    Conv1d<T> conv_a, conv_b, conv_out;

    struct Ctx {
        typename Dense<T>::Cache fc;
        ReluCache<T> r0, ra, rb;
        typename Conv1d<T>::Cache ca, cb, cout;
    };

    void configure(const ExtractorConfig& enc, std::int64_t window_len) {
        if (window_len < enc.min_window_len()) {
            throw ConfigError("decoder: window shorter than encoder minimum");
        }
        w0 = window_len;
        w1 = w0 - enc.conv1_kernel + 1;
        w2 = w1 - enc.conv2_kernel + 1;
        w3 = w2 - enc.conv3_kernel + 1;
        ch_in = enc.conv3_filters;
        ch_a = enc.conv2_filters;
        ch_b = enc.conv1_filters;
        out_ch = enc.in_channels;
        expand.configure(enc.embedding_dim(), static_cast<int>(w3) * ch_in);
        conv_a.configure(ch_in, ch_a, enc.conv3_kernel, /*same_padding=*/true);
        conv_b.configure(ch_a, ch_b, enc.conv2_kernel, /*same_padding=*/true);
        conv_out.configure(ch_b, out_ch, enc.conv1_kernel, /*same_padding=*/true);
    }

    void init(std::uint64_t seed) {
        auto rng = make_rng(seed, "decoder_init");
        expand.init(rng);
        conv_a.init(rng);
        conv_b.init(rng);
        conv_out.init(rng);
    }

    MatX<T> forward(const MatX<T>& embeddings, Ctx& ctx) const {
        MatX<T> h = expand.forward(embeddings, ctx.fc);
        h = relu_forward(h, ctx.r0);
        h = upsample_linear(h, w3, w2, ch_in);
        h = conv_a.forward(h, w2, ctx.ca);
        h = relu_forward(h, ctx.ra);
        h = upsample_linear(h, w2, w1, ch_a);
        h = conv_b.forward(h, w1, ctx.cb);
        h = relu_forward(h, ctx.rb);
        h = upsample_linear(h, w1, w0, ch_b);
        return conv_out.forward(h, w0, ctx.cout);
    }

    MatX<T> backward(const MatX<T>& dreconstruction, Ctx& ctx) {
        MatX<T> d = conv_out.backward(dreconstruction, ctx.cout);
        d = upsample_linear_backward(d, w1, w0, ch_b);
        d = relu_backward(d, ctx.rb);
        d = conv_b.backward(d, ctx.cb);
        d = upsample_linear_backward(d, w2, w1, ch_a);
        d = relu_backward(d, ctx.ra);
        d = conv_a.backward(d, ctx.ca);
        d = upsample_linear_backward(d, w3, w2, ch_in);
        d = relu_backward(d, ctx.r0);
        return expand.backward(d, ctx.fc);
    }

    std::vector<ParamRef<T>> params(const std::string& prefix = "dec") {
        std::vector<ParamRef<T>> out;
        for (auto& p : expand.params(prefix + ".expand")) out.push_back(p);
        for (auto& p : conv_a.params(prefix + ".conv_a")) out.push_back(p);
        for (auto& p : conv_b.params(prefix + ".conv_b")) out.push_back(p);
        for (auto& p : conv_out.params(prefix + ".conv_out")) out.push_back(p);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Freeze partitions
// ---------------------------------------------------------------------------

enum class FreezeMode {
    finetune_last_conv,  // conv1, conv2 frozen; conv3 + head trainable
    all_trainable,
    head_only,       // extractor fully frozen
};

FreezeMode freeze_mode_from_string(const std::string& s);
std::string to_string(FreezeMode m);

template <typename T>
std::vector<char> freeze_partition(const std::vector<ParamRef<T>>& params, FreezeMode mode) {
    std::vector<char> trainable(params.size(), 1);
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params[i].name;
        const bool in_extractor = name.rfind("ext.", 0) == 0;
        switch (mode) {
            case FreezeMode::all_trainable:
                break;
            case FreezeMode::head_only:
                if (in_extractor) trainable[i] = 0;
                break;
            case FreezeMode::finetune_last_conv:
                if (name.rfind("ext.conv1", 0) == 0 || name.rfind("ext.conv2", 0) == 0) {
                    trainable[i] = 0;
                }
                break;
        }
    }
    return trainable;
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptimizerKind { adam, sgd };

OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

template <typename T>
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-7;
    std::int64_t step = 0;
    std::vector<std::vector<T>> m, v;

    void init(const std::vector<ParamRef<T>>& params) {
        step = 0;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.value->size(), T(0));
            v.emplace_back(p.value->size(), T(0));
        }
    }

    void update(const std::vector<ParamRef<T>>& params, const std::vector<char>& trainable,
                double lr) {
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            if (!trainable[i]) continue;
            auto& value = *params[i].value;
            auto& grad = *params[i].grad;
            auto& mi = m[i];
            auto& vi = v[i];
            for (size_t k = 0; k < value.size(); ++k) {
                const double g = static_cast<double>(grad[k]);
                const double mk = beta1 * static_cast<double>(mi[k]) + (1.0 - beta1) * g;
                const double vk = beta2 * static_cast<double>(vi[k]) + (1.0 - beta2) * g * g;
                mi[k] = static_cast<T>(mk);
                vi[k] = static_cast<T>(vk);
                value[k] -= static_cast<T>(lr * (mk / bc1) / (std::sqrt(vk / bc2) + eps));
            }
        }
    }
};

template <typename T>
void sgd_update(const std::vector<ParamRef<T>>& params, const std::vector<char>& trainable,
                double lr) {
    for (size_t i = 0; i < params.size(); ++i) {
        if (!trainable[i]) continue;
        auto& value = *params[i].value;
        auto& grad = *params[i].grad;
        for (size_t k = 0; k < value.size(); ++k) {
            value[k] -= static_cast<T>(lr) * grad[k];
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: one archive = JSON manifest (architecture signature, shapes,
// seed, step) + raw little-endian float32 tensors.
// ---------------------------------------------------------------------------

struct TensorBlob {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::string architecture;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    std::vector<TensorBlob> tensors;

    const TensorBlob& find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const std::string& architecture, std::uint64_t seed,
                     std::int64_t step, const std::vector<TensorBlob>& tensors);

// Throws DataError on a bad file or on architecture mismatch when
// `expect_architecture` is non-empty.
Checkpoint load_checkpoint(const std::string& path, const std::string& expect_architecture = "");

template <typename T>
std::vector<TensorBlob> dump_tensors(const std::vector<ParamRef<T>>& params) {
    std::vector<TensorBlob> blobs;
    for (const auto& p : params) {
        TensorBlob b;
        b.name = p.name;
        b.shape = p.shape;
        b.data.reserve(p.value->size());
        for (const T v : *p.value) b.data.push_back(static_cast<float>(v));
        blobs.push_back(std::move(b));
    }
    return blobs;
}

template <typename T>
void load_tensors(const std::vector<ParamRef<T>>& params, const Checkpoint& ckpt) {
    for (const auto& p : params) {
        const TensorBlob& b = ckpt.find(p.name);
        if (b.data.size() != p.value->size()) {
            throw DataError("checkpoint tensor '" + p.name + "' has " +
                            std::to_string(b.data.size()) + " values, expected " +
                            std::to_string(p.value->size()));
        }
        for (size_t k = 0; k < b.data.size(); ++k) {
            (*p.value)[k] = static_cast<T>(b.data[k]);
        }
    }
}

}  // namespace collossl::nn
