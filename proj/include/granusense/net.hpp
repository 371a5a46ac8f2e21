// Small from-scratch convolutional classifier: two 3x3 convolution stages
// with 2x2 max pooling, a 128-wide hidden layer, and a 9-way softmax output.
// Double precision throughout so analytic gradients can be checked against
// central finite differences.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "granusense/dataset.hpp"
#include "granusense/image.hpp"

namespace gsn::classify {

// Fixed architecture widths. Two convolution stages and the 128-wide hidden
// layer; filter counts sized so the rotation-augmented nine-class task trains
// to the accuracy bar within 10 epochs.
constexpr int kConv1Filters = 16;
constexpr int kConv2Filters = 32;
constexpr int kHiddenWidth = 128;
// The conv features are averaged onto a grid no finer than this before the
// hidden layer; inputs larger than 4*kAvgPoolGrid get their tail pooled away.
constexpr int kAvgPoolGrid = 16;

struct ParamBlock {
    std::string name;
    std::vector<std::size_t> dims;
    double* values = nullptr;
    double* grads = nullptr;
    std::size_t size = 0;
};

// Per-sample activation scratch plus a gradient accumulator the same size as
// the parameter vector. Each worker thread owns one.
struct Workspace {
    std::vector<double> c1, p1, c2, p2, a3, f1, dc1, dp1, dc2, dp2, da3, df1;
    std::vector<std::uint32_t> idx1, idx2;
    std::array<double, kNumClasses> logits{}, dlogits{};
    std::vector<double> grads;

    void zero_grads() { std::fill(grads.begin(), grads.end(), 0.0); }
};

class SmallCnn {
public:
    // Input height/width must be divisible by 4 (two 2x2 pools).
    explicit SmallCnn(int input_h = 64, int input_w = 64);

    int input_height() const { return in_h_; }
    int input_width() const { return in_w_; }
    std::size_t input_size() const { return static_cast<std::size_t>(3) * in_h_ * in_w_; }
    std::size_t param_count() const { return params_.size(); }

    void init_weights(std::uint64_t seed); // He-normal

    Workspace make_workspace() const;

    // Forward pass on one image (planar CHW doubles, values centred on 0).
    void forward(const double* input, Workspace& ws, double* logits) const;

    // Forward + softmax cross-entropy + backward; accumulates the gradient of
    // the per-sample loss into ws.grads. Returns the sample loss.
    double forward_backward(const double* input, int label, Workspace& ws) const;

    // Named views into the parameter vector and the model-level gradient
    // accumulator (filled via accumulate()).
    std::vector<ParamBlock> param_blocks();
    void zero_grads();
    void accumulate(const Workspace& ws);

    const std::vector<double>& params() const { return params_; }
    std::vector<double>& mutable_params() { return params_; }
    const std::vector<double>& grads() const { return grads_; }

    friend void save_weights(const std::string& path, const SmallCnn& model);
    friend SmallCnn load_weights(const std::string& path);

private:
    struct Offsets {
        std::size_t w1, b1, w2, b2, wf1, bf1, wf2, bf2, total;
    };

    int in_h_, in_w_;
    int half_h_, half_w_, quart_h_, quart_w_;
    int pool3_, grid_h_, grid_w_; // final average pool block size and grid
    std::size_t flat_;
    Offsets off_;
    std::vector<double> params_;
    std::vector<double> grads_;
};

void softmax(const double* logits, int n, double* probs);

struct Prediction {
    ClassLabel label;
    double confidence;
    std::array<double, kNumClasses> probs;
};

// Image values in [0,1]; the model input is value - 0.5. Throws
// std::invalid_argument when dimensions do not match the model.
Prediction predict(const SmallCnn& model, const TactileImage& img);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 10;
    int batch = 64;
    double lr = 0.05;
    double lr_decay = 0.5;
    int decay_every = 3; // epochs
    double momentum = 0.9;
    AugmentConfig augment;
    std::uint64_t seed = 42;
    int threads = 1; // 1 = bitwise-deterministic contract
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

// Decoded dataset held in memory as 8-bit planar CHW samples.
struct LoadedDataset {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // n * 3*h*w
    std::vector<int> labels;
    std::vector<Split> splits;

    std::size_t count() const { return labels.size(); }
    std::size_t sample_stride() const { return static_cast<std::size_t>(3) * width * height; }
    std::vector<std::size_t> indices_of(Split split) const;
    const std::uint8_t* sample(std::size_t i) const { return pixels.data() + i * sample_stride(); }
};

LoadedDataset load_dataset(const DatasetManifest& manifest, const std::string& base_dir);

struct TrainResult {
    SmallCnn model;
    std::vector<EpochLog> log;
};

// Mini-batch SGD with momentum and a step learning-rate schedule.
// Augmentation is applied to training batches only. Deterministic for a
// fixed seed when cfg.threads == 1.
TrainResult train(const LoadedDataset& data, const TrainConfig& cfg);

void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::array<std::array<long, kNumClasses>, kNumClasses> counts{}; // [true][pred]

    long total() const;
    long diagonal() const;
    double accuracy() const;
    std::array<long, kNumClasses> row_sums() const;
    // Fraction of off-diagonal mass between Clean/Sand variants of the same
    // shape; reported alongside the heatmap.
    double same_shape_offdiag_fraction() const;
};

ConfusionMatrix evaluate(const SmallCnn& model, const LoadedDataset& data, Split split);

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(const std::string& path);
std::string confusion_report(const ConfusionMatrix& cm);

// Versioned binary weights container: magic header, layer table, little-endian
// float64 payload.
void save_weights(const std::string& path, const SmallCnn& model);
SmallCnn load_weights(const std::string& path);

} // namespace gsn::classify
