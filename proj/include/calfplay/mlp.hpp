#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace calfplay {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using Vector = Eigen::VectorXf;

/// 1024 -> 512 -> 256 -> 3 perceptron. Parameter shapes are fixed; the
/// total trainable count (656,899) is asserted at construction.
struct MlpParams {
    Matrix w1;  // 512 x 1024
    Vector b1;  // 512
    Matrix w2;  // 256 x 512
    Vector b2;  // 256
    Matrix w3;  // 3 x 256
    Vector b3;  // 3

    std::size_t parameter_count() const;
};

constexpr std::size_t kMlpParameterCount = 656'899;
constexpr int kMlpInput = 1024;
constexpr int kMlpHidden1 = 512;
constexpr int kMlpHidden2 = 256;
constexpr int kMlpOutput = 3;

struct TrainConfig {
    float learning_rate = 0.001f;
    float weight_decay = 1e-5f;
    int batch_size = 64;
    float dropout_p = 0.5f;
    int max_epochs = 50;
    int patience = 5;
    std::uint64_t seed = 0;
};

/// Weights fan-in uniform U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases
/// zero. Bit-identical for equal seeds.
MlpParams init_mlp(std::uint64_t seed);

enum class ForwardMode { Train, Eval };

struct ForwardCache {
    Matrix input;        // n x 1024
    Matrix h1;           // post-ReLU, post-dropout, n x 512
    Matrix h2;           // n x 256
    Matrix mask1;        // dropout masks (already scaled by 1/(1-p))
    Matrix mask2;
    float dropout_p = 0.0f;
};

/// Affine -> ReLU -> dropout, twice, then the output affine. Train mode
/// applies inverted dropout (mask / (1-p)); eval mode applies neither
/// dropout nor rescaling.
Matrix forward(const MlpParams& params, const Matrix& x, ForwardMode mode,
               std::mt19937_64& rng, float dropout_p, ForwardCache* cache);

Matrix forward_eval(const MlpParams& params, const Matrix& x);

struct LossResult {
    float loss = 0.0f;   // mean over the batch
    Matrix dlogits;      // gradient of the mean loss, n x 3
};

/// Max-shifted softmax cross-entropy; gradient is (softmax - onehot)/n.
LossResult cross_entropy(const Matrix& logits, const std::vector<int>& labels);

struct MlpGrads {
    Matrix w1, w2, w3;
    Vector b1, b2, b3;
};

MlpGrads backward(const MlpParams& params, const ForwardCache& cache,
                  const Matrix& dlogits);

struct AdamState {
    MlpGrads m;
    MlpGrads v;
    bool initialized = false;
};

constexpr float kAdamBeta1 = 0.9f;
constexpr float kAdamBeta2 = 0.999f;
constexpr float kAdamEps = 1e-8f;

/// Classic Adam with bias correction; L2 weight decay is added to the
/// gradient before the moment updates (coupled, framework-default style).
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               int t, const TrainConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    bool improved = false;
};

struct LabelledMatrix {
    Matrix x;  // n x 1024
    std::vector<int> y;
};

/// Validation-loss early stopping: improvement means strictly lower loss;
/// stop once `patience` consecutive epochs fail to improve.
struct EarlyStopping {
    int patience = 5;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale_epochs = 0;

    /// Records one epoch; returns true if this epoch improved the best loss.
    bool observe(int epoch, double val_loss);
    bool should_stop() const { return stale_epochs >= patience; }
};

struct TrainResult {
    MlpParams best_params;
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

/// Shuffles the training split each epoch, evaluates validation loss per
/// epoch, and stops when it fails to improve (strict less-than) for
/// `patience` consecutive epochs or at max_epochs. Returns the lowest
/// validation-loss checkpoint.
TrainResult train(const LabelledMatrix& train_set, const LabelledMatrix& val_set,
                  const TrainConfig& cfg);

struct EvalReport {
    double accuracy = 0.0;
    std::array<std::optional<double>, kMlpOutput> precision;
    std::array<std::optional<double>, kMlpOutput> recall;
    std::array<std::optional<double>, kMlpOutput> f1;
    std::array<std::array<std::size_t, kMlpOutput>, kMlpOutput> confusion{};  // [true][pred]
    std::array<std::size_t, kMlpOutput> support{};
    std::size_t total = 0;

    double row_percent(int true_class, int predicted) const;
};

/// Argmax over eval-mode logits; precision/recall/F1 per class. A class
/// with zero support has undefined recall (reported absent, not 0).
EvalReport evaluate(const MlpParams& params, const LabelledMatrix& test_set);

EvalReport evaluate_predictions(const std::vector<int>& truth,
                                const std::vector<int>& predicted);

/// Binary checkpoint: shape header, little-endian float32 parameters,
/// config echo.
void save_checkpoint(const std::string& path, const MlpParams& params,
                     const TrainConfig& cfg);
MlpParams load_checkpoint(const std::string& path, TrainConfig* cfg = nullptr);

}  // namespace calfplay
