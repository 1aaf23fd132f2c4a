#pragma once

#include "acm/augment.hpp"
#include "acm/image.hpp"
#include "acm/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace acm {

/// Fixed topology, configurable widths:
/// [Conv 3x3 stride 1 same-pad -> ReLU -> MaxPool 2x2] x3 -> Flatten ->
/// Dense -> ReLU -> Dense -> ReLU -> Dropout -> Dense(1) -> Sigmoid.
struct LayerPlan {
    std::array<int, 3> conv_maps{128, 256, 512};
    int dense_units = 512;
    double dropout_rate = 0.5;

    void validate() const; // throws ParamError
    bool operator==(const LayerPlan&) const = default;
};

struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainMeta {
    int epochs_run = 0;
    std::vector<EpochStats> history;
};

/// Weight tensors in declaration order: conv1 w,b; conv2 w,b; conv3 w,b;
/// fc1 w,b; fc2 w,b; head w,b. Held as doubles in memory; the file format
/// stores 32-bit reals.
struct CnnModel {
    LayerPlan plan;
    std::uint64_t rng_seed = 0;
    std::vector<Tensor> weights;
    TrainMeta meta;
};

struct TrainConfig {
    int batch_size = 64;
    int epochs = 20;
    double val_fraction = 0.2;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const; // throws ParamError
};

/// Spatial trace of the plan: per-stage (h, w, channels) from input through
/// the last pool, then the flattened width and the dense widths.
struct ShapeTrace {
    std::vector<std::array<int, 3>> stages;
    int flat = 0;
    std::array<int, 3> dense{}; // fc1, fc2, head
};
ShapeTrace plan_shapes(const LayerPlan& plan);

/// Seeded He-uniform init for the ReLU layers, Glorot-uniform for the
/// sigmoid head, zero biases.
CnnModel make_model(const LayerPlan& plan, std::uint64_t seed);

/// Patch intensities are divided by 255 before the first layer. In train
/// mode a fresh inverted-dropout mask is drawn from rng (kept units scaled
/// by 1/(1-rate)); eval mode ignores rng and is deterministic.
double forward(const CnnModel& model, const GrayImage& patch, bool train_mode = false,
               Rng* rng = nullptr);

/// -(y ln p + (1-y) ln(1-p)) with p clamped to [1e-7, 1-1e-7].
double loss_bce(double pred, int label);

/// Mean-BCE gradients over the batch for every weight tensor, same shapes
/// and order as model.weights. dropout_mask: per-unit factors (0 or
/// 1/(1-rate)) fixed for the whole batch; nullptr disables dropout.
/// mean_loss, when non-null, receives the batch loss.
std::vector<Tensor> backward(const CnnModel& model, const std::vector<TrainSample>& batch,
                             const std::vector<double>* dropout_mask = nullptr,
                             double* mean_loss = nullptr);

/// One Adam update across all tensors; step is 1-based and drives the bias
/// correction. A zero gradient leaves weights untouched.
void adam_step(std::vector<Tensor>& weights, const std::vector<Tensor>& grads,
               std::vector<Tensor>& m, std::vector<Tensor>& v, long step,
               const TrainConfig& cfg);

/// Adam minibatch training; deterministic per cfg.seed. The dropout mask is
/// drawn once per batch. Returns the trained copy with per-epoch stats.
CnnModel train(const CnnModel& model, const std::vector<TrainSample>& samples,
               const TrainConfig& cfg);

/// "ACM1" container, little-endian, 32-bit reals. Loading validates magic,
/// version and tensor shapes against the stored plan.
void save_model(const CnnModel& model, const std::string& path);
CnnModel load_model(const std::string& path);

/// CSV: epoch,train_loss,val_loss,val_acc.
void write_train_log(const CnnModel& model, const std::string& path);

} // namespace acm
