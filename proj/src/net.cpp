#include "granusense/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "granusense/csv.hpp"
#include "granusense/png_io.hpp"
#include "granusense/rng.hpp"

namespace gsn::classify {

namespace {

// y[oc] = bias[oc] + sum_ic w[oc][ic] (*) x[ic], 3x3 kernel, stride 1, pad 1.
void conv3x3_forward(const double* x, int in_c, int h, int w, const double* wts,
                     const double* bias, int out_c, double* y) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int oc = 0; oc < out_c; ++oc) {
        double* yp = y + static_cast<std::size_t>(oc) * plane;
        std::fill(yp, yp + plane, bias[oc]);
        for (int ic = 0; ic < in_c; ++ic) {
            const double* xp = x + static_cast<std::size_t>(ic) * plane;
            const double* wk = wts + (static_cast<std::size_t>(oc) * in_c + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int r0 = std::max(0, -dy);
                const int r1 = h - std::max(0, dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = wk[ky * 3 + kx];
                    const int dx = kx - 1;
                    const int c0 = std::max(0, -dx);
                    const int c1 = w - std::max(0, dx);
                    for (int r = r0; r < r1; ++r) {
                        double* dst = yp + static_cast<std::size_t>(r) * w;
                        const double* src = xp + static_cast<std::size_t>(r + dy) * w + dx;
                        for (int c = c0; c < c1; ++c) dst[c] += wv * src[c];
                    }
                }
            }
        }
    }
}

// Accumulates weight/bias gradients; writes input gradient when dx != null.
void conv3x3_backward(const double* x, int in_c, int h, int w, const double* wts,
                      int out_c, const double* dy, double* dx, double* gw, double* gb) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    if (dx) std::fill(dx, dx + static_cast<std::size_t>(in_c) * plane, 0.0);
    for (int oc = 0; oc < out_c; ++oc) {
        const double* dyp = dy + static_cast<std::size_t>(oc) * plane;
        double acc_b = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc_b += dyp[i];
        gb[oc] += acc_b;
        for (int ic = 0; ic < in_c; ++ic) {
            const double* xp = x + static_cast<std::size_t>(ic) * plane;
            double* dxp = dx ? dx + static_cast<std::size_t>(ic) * plane : nullptr;
            const double* wk = wts + (static_cast<std::size_t>(oc) * in_c + ic) * 9;
            double* gwk = gw + (static_cast<std::size_t>(oc) * in_c + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dyo = ky - 1;
                const int r0 = std::max(0, -dyo);
                const int r1 = h - std::max(0, dyo);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dxo = kx - 1;
                    const int c0 = std::max(0, -dxo);
                    const int c1 = w - std::max(0, dxo);
                    const double wv = wk[ky * 3 + kx];
                    double acc_w = 0.0;
                    for (int r = r0; r < r1; ++r) {
                        const double* drow = dyp + static_cast<std::size_t>(r) * w;
                        const double* srow = xp + static_cast<std::size_t>(r + dyo) * w + dxo;
                        double* dsrow =
                            dxp ? dxp + static_cast<std::size_t>(r + dyo) * w + dxo : nullptr;
                        if (dsrow) {
                            for (int c = c0; c < c1; ++c) {
                                acc_w += srow[c] * drow[c];
                                dsrow[c] += wv * drow[c];
                            }
                        } else {
                            for (int c = c0; c < c1; ++c) acc_w += srow[c] * drow[c];
                        }
                    }
                    gwk[ky * 3 + kx] += acc_w;
                }
            }
        }
    }
}

void relu_forward(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

// Uses the post-activation values to mask the upstream gradient.
void relu_backward(const double* y, double* dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (y[i] <= 0.0) dy[i] = 0.0;
}

void maxpool2_forward(const double* x, int channels, int h, int w, double* y,
                      std::uint32_t* idx) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const int oh = h / 2, ow = w / 2;
    std::size_t o = 0;
    for (int ch = 0; ch < channels; ++ch) {
        const double* xp = x + static_cast<std::size_t>(ch) * plane;
        for (int r = 0; r < oh; ++r) {
            for (int c = 0; c < ow; ++c) {
                const std::size_t base = static_cast<std::size_t>(2 * r) * w + 2 * c;
                std::size_t best = base;
                double bv = xp[base];
                const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
                for (std::size_t k : cand) {
                    if (xp[k] > bv) {
                        bv = xp[k];
                        best = k;
                    }
                }
                y[o] = bv;
                idx[o] = static_cast<std::uint32_t>(static_cast<std::size_t>(ch) * plane + best);
                ++o;
            }
        }
    }
}

void maxpool2_backward(const double* dy, const std::uint32_t* idx, std::size_t out_n,
                       double* dx, std::size_t in_n) {
    std::fill(dx, dx + in_n, 0.0);
    for (std::size_t i = 0; i < out_n; ++i) dx[idx[i]] += dy[i];
}

// Block average pool with block size k (k == 1 passes through).
void avgpool_forward(const double* x, int channels, int h, int w, int k, double* y) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const int oh = h / k, ow = w / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    std::size_t o = 0;
    for (int ch = 0; ch < channels; ++ch) {
        const double* xp = x + static_cast<std::size_t>(ch) * plane;
        for (int r = 0; r < oh; ++r) {
            for (int c = 0; c < ow; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx)
                        acc += xp[static_cast<std::size_t>(r * k + dy) * w + c * k + dx];
                y[o++] = acc * inv;
            }
        }
    }
}

void avgpool_backward(const double* dy, int channels, int h, int w, int k, double* dx) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const int oh = h / k, ow = w / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    std::size_t o = 0;
    for (int ch = 0; ch < channels; ++ch) {
        double* dxp = dx + static_cast<std::size_t>(ch) * plane;
        for (int r = 0; r < oh; ++r) {
            for (int c = 0; c < ow; ++c) {
                const double g = dy[o++] * inv;
                for (int dyy = 0; dyy < k; ++dyy)
                    for (int dxx = 0; dxx < k; ++dxx)
                        dxp[static_cast<std::size_t>(r * k + dyy) * w + c * k + dxx] = g;
            }
        }
    }
}

void fc_forward(const double* x, int in_n, const double* wts, const double* bias,
                int out_n, double* y) {
    for (int o = 0; o < out_n; ++o) {
        const double* row = wts + static_cast<std::size_t>(o) * in_n;
        double acc = bias[o];
        for (int i = 0; i < in_n; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

void fc_backward(const double* x, int in_n, const double* wts, int out_n,
                 const double* dy, double* dx, double* gw, double* gb) {
    if (dx) std::fill(dx, dx + in_n, 0.0);
    for (int o = 0; o < out_n; ++o) {
        const double d = dy[o];
        gb[o] += d;
        const double* row = wts + static_cast<std::size_t>(o) * in_n;
        double* grow = gw + static_cast<std::size_t>(o) * in_n;
        if (dx) {
            for (int i = 0; i < in_n; ++i) {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        } else {
            for (int i = 0; i < in_n; ++i) grow[i] += d * x[i];
        }
    }
}

void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

constexpr char kWeightsMagic[8] = {'G', 'S', 'N', 'W', 'T', 'S', '0', '1'};

} // namespace

SmallCnn::SmallCnn(int input_h, int input_w) : in_h_(input_h), in_w_(input_w) {
    if (input_h < 4 || input_w < 4 || input_h % 4 != 0 || input_w % 4 != 0)
        throw std::invalid_argument("SmallCnn: input dimensions must be multiples of 4");
    half_h_ = in_h_ / 2;
    half_w_ = in_w_ / 2;
    quart_h_ = in_h_ / 4;
    quart_w_ = in_w_ / 4;
    pool3_ = std::max(1, std::min(quart_h_, quart_w_) / kAvgPoolGrid);
    while (quart_h_ % pool3_ != 0 || quart_w_ % pool3_ != 0) --pool3_;
    grid_h_ = quart_h_ / pool3_;
    grid_w_ = quart_w_ / pool3_;
    flat_ = static_cast<std::size_t>(kConv2Filters) * grid_h_ * grid_w_;

    std::size_t o = 0;
    off_.w1 = o; o += static_cast<std::size_t>(kConv1Filters) * 3 * 9;
    off_.b1 = o; o += kConv1Filters;
    off_.w2 = o; o += static_cast<std::size_t>(kConv2Filters) * kConv1Filters * 9;
    off_.b2 = o; o += kConv2Filters;
    off_.wf1 = o; o += static_cast<std::size_t>(kHiddenWidth) * flat_;
    off_.bf1 = o; o += kHiddenWidth;
    off_.wf2 = o; o += static_cast<std::size_t>(kNumClasses) * kHiddenWidth;
    off_.bf2 = o; o += kNumClasses;
    off_.total = o;

    params_.assign(off_.total, 0.0);
    grads_.assign(off_.total, 0.0);
}

void SmallCnn::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    auto he_fill = [&](std::size_t off, std::size_t n, std::size_t fan_in) {
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < n; ++i) params_[off + i] = rng.normal(0.0, sd);
    };
    he_fill(off_.w1, static_cast<std::size_t>(kConv1Filters) * 3 * 9, 3 * 9);
    he_fill(off_.w2, static_cast<std::size_t>(kConv2Filters) * kConv1Filters * 9,
            static_cast<std::size_t>(kConv1Filters) * 9);
    he_fill(off_.wf1, static_cast<std::size_t>(kHiddenWidth) * flat_, flat_);
    he_fill(off_.wf2, static_cast<std::size_t>(kNumClasses) * kHiddenWidth, kHiddenWidth);
    // biases stay zero
}

Workspace SmallCnn::make_workspace() const {
    Workspace ws;
    const std::size_t full = static_cast<std::size_t>(in_h_) * in_w_;
    const std::size_t half = static_cast<std::size_t>(half_h_) * half_w_;
    const std::size_t quart = static_cast<std::size_t>(quart_h_) * quart_w_;
    ws.c1.assign(static_cast<std::size_t>(kConv1Filters) * full, 0.0);
    ws.p1.assign(static_cast<std::size_t>(kConv1Filters) * half, 0.0);
    ws.c2.assign(static_cast<std::size_t>(kConv2Filters) * half, 0.0);
    ws.p2.assign(static_cast<std::size_t>(kConv2Filters) * quart, 0.0);
    ws.a3.assign(flat_, 0.0);
    ws.f1.assign(kHiddenWidth, 0.0);
    ws.dc1.assign(ws.c1.size(), 0.0);
    ws.dp1.assign(ws.p1.size(), 0.0);
    ws.dc2.assign(ws.c2.size(), 0.0);
    ws.dp2.assign(ws.p2.size(), 0.0);
    ws.da3.assign(ws.a3.size(), 0.0);
    ws.df1.assign(ws.f1.size(), 0.0);
    ws.idx1.assign(ws.p1.size(), 0);
    ws.idx2.assign(ws.p2.size(), 0);
    ws.grads.assign(off_.total, 0.0);
    return ws;
}

void SmallCnn::forward(const double* input, Workspace& ws, double* logits) const {
    const double* p = params_.data();
    conv3x3_forward(input, 3, in_h_, in_w_, p + off_.w1, p + off_.b1, kConv1Filters,
                    ws.c1.data());
    relu_forward(ws.c1.data(), ws.c1.size());
    maxpool2_forward(ws.c1.data(), kConv1Filters, in_h_, in_w_, ws.p1.data(), ws.idx1.data());
    conv3x3_forward(ws.p1.data(), kConv1Filters, half_h_, half_w_, p + off_.w2, p + off_.b2,
                    kConv2Filters, ws.c2.data());
    relu_forward(ws.c2.data(), ws.c2.size());
    maxpool2_forward(ws.c2.data(), kConv2Filters, half_h_, half_w_, ws.p2.data(),
                     ws.idx2.data());
    avgpool_forward(ws.p2.data(), kConv2Filters, quart_h_, quart_w_, pool3_, ws.a3.data());
    fc_forward(ws.a3.data(), static_cast<int>(flat_), p + off_.wf1, p + off_.bf1,
               kHiddenWidth, ws.f1.data());
    relu_forward(ws.f1.data(), ws.f1.size());
    fc_forward(ws.f1.data(), kHiddenWidth, p + off_.wf2, p + off_.bf2, kNumClasses, logits);
}

double SmallCnn::forward_backward(const double* input, int label, Workspace& ws) const {
    if (label < 0 || label >= kNumClasses)
        throw std::invalid_argument("forward_backward: label out of range");
    forward(input, ws, ws.logits.data());

    double probs[kNumClasses];
    softmax(ws.logits.data(), kNumClasses, probs);
    const double loss = -std::log(std::max(probs[label], 1e-300));

    for (int i = 0; i < kNumClasses; ++i) ws.dlogits[static_cast<std::size_t>(i)] = probs[i];
    ws.dlogits[static_cast<std::size_t>(label)] -= 1.0;

    const double* p = params_.data();
    double* g = ws.grads.data();

    fc_backward(ws.f1.data(), kHiddenWidth, p + off_.wf2, kNumClasses, ws.dlogits.data(),
                ws.df1.data(), g + off_.wf2, g + off_.bf2);
    relu_backward(ws.f1.data(), ws.df1.data(), ws.f1.size());
    fc_backward(ws.a3.data(), static_cast<int>(flat_), p + off_.wf1, kHiddenWidth,
                ws.df1.data(), ws.da3.data(), g + off_.wf1, g + off_.bf1);
    avgpool_backward(ws.da3.data(), kConv2Filters, quart_h_, quart_w_, pool3_,
                     ws.dp2.data());
    maxpool2_backward(ws.dp2.data(), ws.idx2.data(), ws.p2.size(), ws.dc2.data(),
                      ws.c2.size());
    relu_backward(ws.c2.data(), ws.dc2.data(), ws.c2.size());
    conv3x3_backward(ws.p1.data(), kConv1Filters, half_h_, half_w_, p + off_.w2,
                     kConv2Filters, ws.dc2.data(), ws.dp1.data(), g + off_.w2, g + off_.b2);
    maxpool2_backward(ws.dp1.data(), ws.idx1.data(), ws.p1.size(), ws.dc1.data(),
                      ws.c1.size());
    relu_backward(ws.c1.data(), ws.dc1.data(), ws.c1.size());
    conv3x3_backward(input, 3, in_h_, in_w_, p + off_.w1, kConv1Filters, ws.dc1.data(),
                     nullptr, g + off_.w1, g + off_.b1);
    return loss;
}

std::vector<ParamBlock> SmallCnn::param_blocks() {
    auto block = [&](const char* name, std::vector<std::size_t> dims, std::size_t off,
                     std::size_t n) {
        return ParamBlock{name, std::move(dims), params_.data() + off, grads_.data() + off, n};
    };
    const auto c1 = static_cast<std::size_t>(kConv1Filters);
    const auto c2 = static_cast<std::size_t>(kConv2Filters);
    const auto hidden = static_cast<std::size_t>(kHiddenWidth);
    const auto classes = static_cast<std::size_t>(kNumClasses);
    return {
        block("conv1.weight", {c1, 3, 3, 3}, off_.w1, c1 * 3 * 9),
        block("conv1.bias", {c1}, off_.b1, c1),
        block("conv2.weight", {c2, c1, 3, 3}, off_.w2, c2 * c1 * 9),
        block("conv2.bias", {c2}, off_.b2, c2),
        block("fc1.weight", {hidden, flat_}, off_.wf1, hidden * flat_),
        block("fc1.bias", {hidden}, off_.bf1, hidden),
        block("fc2.weight", {classes, hidden}, off_.wf2, classes * hidden),
        block("fc2.bias", {classes}, off_.bf2, classes),
    };
}

void SmallCnn::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void SmallCnn::accumulate(const Workspace& ws) {
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += ws.grads[i];
}

void softmax(const double* logits, int n, double* probs) {
    double mx = logits[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (int i = 0; i < n; ++i) probs[i] /= sum;
}

Prediction predict(const SmallCnn& model, const TactileImage& img) {
    if (img.width != model.input_width() || img.height != model.input_height()) {
        std::ostringstream os;
        os << "predict: image is " << img.width << "x" << img.height
           << " but the model expects " << model.input_width() << "x"
           << model.input_height();
        throw std::invalid_argument(os.str());
    }
    std::vector<double> input(model.input_size());
    const std::size_t plane = img.pixel_count();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            input[c * plane + i] = img.channels[c][i] - 0.5;

    Workspace ws = model.make_workspace();
    double logits[kNumClasses];
    model.forward(input.data(), ws, logits);

    Prediction pred{};
    softmax(logits, kNumClasses, pred.probs.data());
    int best = 0;
    for (int i = 1; i < kNumClasses; ++i)
        if (pred.probs[static_cast<std::size_t>(i)] > pred.probs[static_cast<std::size_t>(best)])
            best = i;
    pred.label = static_cast<ClassLabel>(best);
    pred.confidence = pred.probs[static_cast<std::size_t>(best)];
    return pred;
}

std::vector<std::size_t> LoadedDataset::indices_of(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == split) out.push_back(i);
    return out;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, const std::string& base_dir) {
    namespace fs = std::filesystem;
    LoadedDataset data;
    if (manifest.entries.empty()) throw std::invalid_argument("load_dataset: empty manifest");

    for (const auto& entry : manifest.entries) {
        const TactileImage img = pngio::read_rgb8((fs::path(base_dir) / entry.path).string());
        if (data.width == 0) {
            data.width = img.width;
            data.height = img.height;
            data.pixels.reserve(manifest.entries.size() * static_cast<std::size_t>(3) *
                                img.width * img.height);
        } else if (img.width != data.width || img.height != data.height) {
            throw std::invalid_argument("load_dataset: image size mismatch at " + entry.path);
        }
        const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < plane; ++i)
                data.pixels.push_back(static_cast<std::uint8_t>(
                    std::lround(std::clamp(img.channels[c][i], 0.0, 1.0) * 255.0)));
        data.labels.push_back(static_cast<int>(entry.label));
        data.splits.push_back(entry.split);
    }
    return data;
}

namespace {

void decode_input(const std::uint8_t* bytes, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = bytes[i] / 255.0 - 0.5;
}

TactileImage to_image(const std::uint8_t* bytes, int w, int h) {
    TactileImage img(w, h, 0.25);
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            img.channels[c][i] = bytes[c * plane + i] / 255.0;
    return img;
}

struct EvalAccum {
    double loss = 0.0;
    long correct = 0;
    long count = 0;
};

EvalAccum run_eval(const SmallCnn& model, const LoadedDataset& data,
                   const std::vector<std::size_t>& idx, ConfusionMatrix* cm) {
    Workspace ws = model.make_workspace();
    std::vector<double> input(model.input_size());
    double logits[kNumClasses];
    double probs[kNumClasses];
    EvalAccum acc;
    for (std::size_t i : idx) {
        decode_input(data.sample(i), model.input_size(), input.data());
        model.forward(input.data(), ws, logits);
        softmax(logits, kNumClasses, probs);
        int best = 0;
        for (int k = 1; k < kNumClasses; ++k)
            if (probs[k] > probs[best]) best = k;
        const int label = data.labels[i];
        acc.loss += -std::log(std::max(probs[label], 1e-300));
        acc.correct += best == label ? 1 : 0;
        ++acc.count;
        if (cm) ++cm->counts[static_cast<std::size_t>(label)][static_cast<std::size_t>(best)];
    }
    return acc;
}

} // namespace

TrainResult train(const LoadedDataset& data, const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");

    const auto train_idx_base = data.indices_of(Split::Train);
    const auto val_idx = data.indices_of(Split::Val);
    if (train_idx_base.empty() || val_idx.empty())
        throw std::invalid_argument("train: manifest needs nonempty train and val splits");

    TrainResult result{SmallCnn(data.height, data.width), {}};
    SmallCnn& model = result.model;
    model.init_weights(derive_seed(cfg.seed, 0x1217));

    std::vector<double> velocity(model.param_count(), 0.0);
    const int threads = std::max(1, cfg.threads);
    std::vector<Workspace> workspaces;
    workspaces.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) workspaces.push_back(model.make_workspace());

    std::vector<std::size_t> order = train_idx_base;
    const std::size_t n_train = order.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr =
            cfg.lr * std::pow(cfg.lr_decay, epoch / std::max(1, cfg.decay_every));

        Rng shuffle_rng(derive_seed(cfg.seed, 0xE906000ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n_train; i > 1; --i) {
            const std::size_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        long epoch_correct = 0;

        for (std::size_t batch_start = 0; batch_start < n_train;
             batch_start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t batch_end =
                std::min(batch_start + static_cast<std::size_t>(cfg.batch), n_train);
            const std::size_t batch_n = batch_end - batch_start;

            model.zero_grads();
            std::vector<double> batch_losses(batch_n, 0.0);
            std::vector<int> batch_correct(batch_n, 0);

            auto process = [&](int tid, std::size_t lo, std::size_t hi) {
                Workspace& ws = workspaces[static_cast<std::size_t>(tid)];
                ws.zero_grads();
                std::vector<double> input(model.input_size());
                for (std::size_t k = lo; k < hi; ++k) {
                    const std::size_t sample_idx = order[batch_start + k];
                    const std::uint64_t step =
                        static_cast<std::uint64_t>(epoch) * n_train + batch_start + k;
                    Rng arng(derive_seed(cfg.seed ^ 0xA36B7A1ULL, step));
                    TactileImage img = to_image(data.sample(sample_idx), data.width, data.height);
                    img = augment(img, cfg.augment, arng);
                    const std::size_t plane = img.pixel_count();
                    for (std::size_t c = 0; c < 3; ++c)
                        for (std::size_t i = 0; i < plane; ++i)
                            input[c * plane + i] = img.channels[c][i] - 0.5;
                    const int label = data.labels[sample_idx];
                    batch_losses[k] = model.forward_backward(input.data(), label, ws);
                    int best = 0;
                    for (int c = 1; c < kNumClasses; ++c)
                        if (ws.logits[static_cast<std::size_t>(c)] >
                            ws.logits[static_cast<std::size_t>(best)])
                            best = c;
                    batch_correct[k] = best == label ? 1 : 0;
                }
            };

            if (threads == 1) {
                process(0, 0, batch_n);
            } else {
                std::vector<std::thread> pool;
                const std::size_t chunk = (batch_n + static_cast<std::size_t>(threads) - 1) /
                                          static_cast<std::size_t>(threads);
                for (int t = 0; t < threads; ++t) {
                    const std::size_t lo = std::min(static_cast<std::size_t>(t) * chunk, batch_n);
                    const std::size_t hi = std::min(lo + chunk, batch_n);
                    pool.emplace_back(process, t, lo, hi);
                }
                for (auto& th : pool) th.join();
            }

            for (const auto& ws : workspaces) model.accumulate(ws);

            double batch_loss = 0.0;
            for (std::size_t k = 0; k < batch_n; ++k) {
                batch_loss += batch_losses[k];
                epoch_correct += batch_correct[k];
            }
            epoch_loss += batch_loss;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error(
                    "train: loss became non-finite; lower train.lr or disable augmentation "
                    "noise and retry");

            const double scale = lr / static_cast<double>(batch_n);
            auto& params = model.mutable_params();
            const auto& grads = model.grads();
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i] = cfg.momentum * velocity[i] - scale * grads[i];
                params[i] += velocity[i];
            }
        }

        const EvalAccum val = run_eval(model, data, val_idx, nullptr);
        EpochLog log;
        log.epoch = epoch + 1;
        log.lr = lr;
        log.train_loss = epoch_loss / static_cast<double>(n_train);
        log.train_acc = static_cast<double>(epoch_correct) / static_cast<double>(n_train);
        log.val_loss = val.count ? val.loss / static_cast<double>(val.count) : 0.0;
        log.val_acc = val.count ? static_cast<double>(val.correct) / static_cast<double>(val.count)
                                : 0.0;
        result.log.push_back(log);
    }
    return result;
}

void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    auto out = csv::open_out(path);
    out << "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& e : log)
        out << e.epoch << ',' << csv::format_double(e.lr) << ','
            << csv::format_double(e.train_loss) << ',' << csv::format_double(e.train_acc)
            << ',' << csv::format_double(e.val_loss) << ',' << csv::format_double(e.val_acc)
            << '\n';
}

long ConfusionMatrix::total() const {
    long n = 0;
    for (const auto& row : counts)
        for (long v : row) n += v;
    return n;
}

long ConfusionMatrix::diagonal() const {
    long n = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) n += counts[i][i];
    return n;
}

double ConfusionMatrix::accuracy() const {
    const long t = total();
    return t > 0 ? static_cast<double>(diagonal()) / static_cast<double>(t) : 0.0;
}

std::array<long, kNumClasses> ConfusionMatrix::row_sums() const {
    std::array<long, kNumClasses> sums{};
    for (std::size_t r = 0; r < kNumClasses; ++r)
        for (std::size_t c = 0; c < kNumClasses; ++c) sums[r] += counts[r][c];
    return sums;
}

double ConfusionMatrix::same_shape_offdiag_fraction() const {
    long off = 0;
    for (std::size_t r = 0; r < kNumClasses; ++r)
        for (std::size_t c = 0; c < kNumClasses; ++c)
            if (r != c) off += counts[r][c];
    if (off == 0) return 1.0; // vacuous: no misclassifications at all
    long same_shape = 0;
    for (std::size_t shape = 0; shape < 4; ++shape) {
        same_shape += counts[shape][shape + 4];
        same_shape += counts[shape + 4][shape];
    }
    return static_cast<double>(same_shape) / static_cast<double>(off);
}

ConfusionMatrix evaluate(const SmallCnn& model, const LoadedDataset& data, Split split) {
    if (data.width != model.input_width() || data.height != model.input_height())
        throw std::invalid_argument("evaluate: dataset image size does not match the model");
    const auto idx = data.indices_of(split);
    if (idx.empty()) throw std::invalid_argument("evaluate: split is empty");
    ConfusionMatrix cm;
    run_eval(model, data, idx, &cm);
    return cm;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
    auto out = csv::open_out(path);
    out << "true\\pred";
    for (const auto& name : all_label_names()) out << ',' << name;
    out << '\n';
    const auto names = all_label_names();
    for (std::size_t r = 0; r < kNumClasses; ++r) {
        out << names[r];
        for (std::size_t c = 0; c < kNumClasses; ++c) out << ',' << cm.counts[r][c];
        out << '\n';
    }
}

ConfusionMatrix read_confusion_csv(const std::string& path) {
    auto in = csv::open_in(path);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw csv::ParseError(path, 1, "empty confusion matrix");
    ++lineno;
    ConfusionMatrix cm;
    for (std::size_t r = 0; r < kNumClasses; ++r) {
        if (!std::getline(in, line))
            throw csv::ParseError(path, lineno, "expected 9 matrix rows");
        ++lineno;
        const auto fields = csv::split_fields(line);
        if (fields.size() != kNumClasses + 1)
            throw csv::ParseError(path, lineno, "expected label + 9 counts");
        if (parse_label(fields[0]) != static_cast<ClassLabel>(r))
            throw csv::ParseError(path, lineno, "unexpected row label " + fields[0]);
        for (std::size_t c = 0; c < kNumClasses; ++c)
            cm.counts[r][c] = std::lround(csv::parse_double(fields[c + 1], path, lineno));
    }
    return cm;
}

std::string confusion_report(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os.precision(4);
    os << "test accuracy: " << cm.accuracy() << " (" << cm.diagonal() << "/" << cm.total()
       << ")\n";
    long off = cm.total() - cm.diagonal();
    if (off == 0) {
        os << "off-diagonal mass: none (no misclassifications)\n";
    } else {
        os << "off-diagonal mass: " << off << " samples, of which "
           << 100.0 * cm.same_shape_offdiag_fraction()
           << "% lie between Clean/Sand variants of the same shape\n";
    }
    return os.str();
}

void save_weights(const std::string& path, const SmallCnn& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weights file " + path);

    // Header + layer table + little-endian float64 payload.
    auto blocks = const_cast<SmallCnn&>(model).param_blocks();
    out.write(kWeightsMagic, 8);
    write_u32(out, 1); // version
    write_u32(out, static_cast<std::uint32_t>(blocks.size()));
    write_u32(out, static_cast<std::uint32_t>(model.input_height()));
    write_u32(out, static_cast<std::uint32_t>(model.input_width()));

    std::uint64_t offset = 0;
    for (const auto& b : blocks) {
        write_u16(out, static_cast<std::uint16_t>(b.name.size()));
        out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        write_u32(out, static_cast<std::uint32_t>(b.dims.size()));
        for (std::size_t d : b.dims) write_u32(out, static_cast<std::uint32_t>(d));
        write_u64(out, offset);
        write_u64(out, b.size);
        offset += b.size;
    }
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.size; ++i) {
            const auto bits = std::bit_cast<std::uint64_t>(b.values[i]);
            write_u64(out, bits);
        }
    }
    if (!out) throw std::runtime_error("failed writing weights file " + path);
}

SmallCnn load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weights file " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kWeightsMagic, 8) != 0)
        throw std::runtime_error(path + " is not a granusense weights file");
    const std::uint32_t version = read_u32(in);
    if (version != 1)
        throw std::runtime_error("unsupported weights version " + std::to_string(version));
    const std::uint32_t count = read_u32(in);
    const int in_h = static_cast<int>(read_u32(in));
    const int in_w = static_cast<int>(read_u32(in));

    SmallCnn model(in_h, in_w);
    auto blocks = model.param_blocks();
    if (count != blocks.size())
        throw std::invalid_argument("weights file layer table has " + std::to_string(count) +
                                    " entries, expected " + std::to_string(blocks.size()));

    struct Entry {
        std::string name;
        std::vector<std::size_t> dims;
        std::uint64_t offset, count;
    };
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        const std::uint16_t len = read_u16(in);
        e.name.resize(len);
        in.read(e.name.data(), len);
        const std::uint32_t ndim = read_u32(in);
        for (std::uint32_t d = 0; d < ndim; ++d) e.dims.push_back(read_u32(in));
        e.offset = read_u64(in);
        e.count = read_u64(in);
        entries.push_back(std::move(e));
    }
    if (!in) throw std::runtime_error("truncated weights file " + path);

    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (entries[i].name != blocks[i].name || entries[i].dims != blocks[i].dims ||
            entries[i].count != blocks[i].size)
            throw std::invalid_argument("weights file layer '" + entries[i].name +
                                        "' does not match the expected architecture");
    }
    for (auto& b : blocks) {
        for (std::size_t i = 0; i < b.size; ++i) {
            const std::uint64_t bits = read_u64(in);
            b.values[i] = std::bit_cast<double>(bits);
        }
    }
    if (!in) throw std::runtime_error("truncated weights file " + path);
    for (const auto& b : blocks)
        for (std::size_t i = 0; i < b.size; ++i)
            if (!std::isfinite(b.values[i]))
                throw std::runtime_error("weights file contains non-finite values");
    return model;
}

} // namespace gsn::classify
