#include "calfplay/mlp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "calfplay/dataset.hpp"

namespace calfplay {

std::size_t MlpParams::parameter_count() const {
    return static_cast<std::size_t>(w1.size()) + b1.size() + w2.size() +
           b2.size() + w3.size() + b3.size();
}

namespace {

// [0, 1) from the top 53 bits, independent of distribution internals.
double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void fill_fan_in_uniform(Matrix& w, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            w(r, c) = static_cast<float>((2.0 * unit_double(rng) - 1.0) * bound);
}

}  // namespace

MlpParams init_mlp(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MlpParams p;
    p.w1.resize(kMlpHidden1, kMlpInput);
    p.b1 = Vector::Zero(kMlpHidden1);
    p.w2.resize(kMlpHidden2, kMlpHidden1);
    p.b2 = Vector::Zero(kMlpHidden2);
    p.w3.resize(kMlpOutput, kMlpHidden2);
    p.b3 = Vector::Zero(kMlpOutput);
    fill_fan_in_uniform(p.w1, rng);
    fill_fan_in_uniform(p.w2, rng);
    fill_fan_in_uniform(p.w3, rng);
    if (p.parameter_count() != kMlpParameterCount)
        throw std::logic_error("MLP parameter count mismatch");
    return p;
}

namespace {

Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
    Matrix out = x * w.transpose();
    out.rowwise() += b.transpose();
    return out;
}

// Inverted dropout mask: entries are 0 or 1/(1-p).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, float p,
                    std::mt19937_64& rng) {
    Matrix mask(rows, cols);
    const float keep_scale = 1.0f / (1.0f - p);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            mask(r, c) = unit_double(rng) < p ? 0.0f : keep_scale;
    return mask;
}

}  // namespace

Matrix forward(const MlpParams& params, const Matrix& x, ForwardMode mode,
               std::mt19937_64& rng, float dropout_p, ForwardCache* cache) {
    if (x.cols() != kMlpInput)
        throw std::invalid_argument("input must have 1024 columns");
    if (!x.allFinite()) throw std::invalid_argument("non-finite input");

    Matrix h1 = affine(x, params.w1, params.b1).cwiseMax(0.0f);
    Matrix mask1, mask2;
    if (mode == ForwardMode::Train && dropout_p > 0.0f) {
        mask1 = dropout_mask(h1.rows(), h1.cols(), dropout_p, rng);
        h1 = h1.cwiseProduct(mask1);
    }
    Matrix h2 = affine(h1, params.w2, params.b2).cwiseMax(0.0f);
    if (mode == ForwardMode::Train && dropout_p > 0.0f) {
        mask2 = dropout_mask(h2.rows(), h2.cols(), dropout_p, rng);
        h2 = h2.cwiseProduct(mask2);
    }
    Matrix logits = affine(h2, params.w3, params.b3);

    if (cache) {
        cache->input = x;
        cache->h1 = h1;
        cache->h2 = h2;
        cache->mask1 = std::move(mask1);
        cache->mask2 = std::move(mask2);
        cache->dropout_p = mode == ForwardMode::Train ? dropout_p : 0.0f;
    }
    return logits;
}

Matrix forward_eval(const MlpParams& params, const Matrix& x) {
    std::mt19937_64 unused(0);
    return forward(params, x, ForwardMode::Eval, unused, 0.0f, nullptr);
}

LossResult cross_entropy(const Matrix& logits,
                         const std::vector<int>& labels) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size())
        throw std::invalid_argument("logits/labels size mismatch");
    const Eigen::Index n = logits.rows();
    LossResult result;
    result.dlogits.resize(n, logits.cols());
    double loss_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        float maxv = logits.row(i).maxCoeff();
        Eigen::RowVectorXf shifted = logits.row(i).array() - maxv;
        Eigen::RowVectorXf expv = shifted.array().exp();
        float denom = expv.sum();
        Eigen::RowVectorXf softmax = expv / denom;
        int y = labels[static_cast<std::size_t>(i)];
        loss_sum += -(static_cast<double>(shifted[y]) -
                      std::log(static_cast<double>(denom)));
        result.dlogits.row(i) = softmax;
        result.dlogits(i, y) -= 1.0f;
    }
    result.loss = static_cast<float>(loss_sum / static_cast<double>(n));
    result.dlogits /= static_cast<float>(n);
    return result;
}

MlpGrads backward(const MlpParams& params, const ForwardCache& cache,
                  const Matrix& dlogits) {
    if (dlogits.rows() != cache.input.rows() || dlogits.cols() != kMlpOutput)
        throw std::invalid_argument("dlogits shape mismatch");

    MlpGrads g;
    g.w3 = dlogits.transpose() * cache.h2;
    g.b3 = dlogits.colwise().sum().transpose();

    Matrix dh2 = dlogits * params.w3;
    if (cache.mask2.size()) dh2 = dh2.cwiseProduct(cache.mask2);
    // ReLU gate: cache.h2 holds post-dropout activations, but the mask
    // never flips the sign, so h2 > 0 identifies active units.
    dh2 = (cache.h2.array() > 0.0f).select(dh2, 0.0f);

    g.w2 = dh2.transpose() * cache.h1;
    g.b2 = dh2.colwise().sum().transpose();

    Matrix dh1 = dh2 * params.w2;
    if (cache.mask1.size()) dh1 = dh1.cwiseProduct(cache.mask1);
    dh1 = (cache.h1.array() > 0.0f).select(dh1, 0.0f);

    g.w1 = dh1.transpose() * cache.input;
    g.b1 = dh1.colwise().sum().transpose();
    return g;
}

namespace {

void adam_update(Matrix& p, const Matrix& g_in, Matrix& m, Matrix& v, int t,
                 const TrainConfig& cfg) {
    Matrix g = g_in + cfg.weight_decay * p;
    m = kAdamBeta1 * m + (1.0f - kAdamBeta1) * g;
    v = kAdamBeta2 * v + (1.0f - kAdamBeta2) * g.cwiseProduct(g);
    const float bc1 = 1.0f - std::pow(kAdamBeta1, static_cast<float>(t));
    const float bc2 = 1.0f - std::pow(kAdamBeta2, static_cast<float>(t));
    Matrix mhat = m / bc1;
    Matrix vhat = v / bc2;
    p.array() -= cfg.learning_rate * mhat.array() /
                 (vhat.array().sqrt() + kAdamEps);
}

void adam_update(Vector& p, const Vector& g_in, Vector& m, Vector& v, int t,
                 const TrainConfig& cfg) {
    Vector g = g_in + cfg.weight_decay * p;
    m = kAdamBeta1 * m + (1.0f - kAdamBeta1) * g;
    v = kAdamBeta2 * v + (1.0f - kAdamBeta2) * g.cwiseProduct(g);
    const float bc1 = 1.0f - std::pow(kAdamBeta1, static_cast<float>(t));
    const float bc2 = 1.0f - std::pow(kAdamBeta2, static_cast<float>(t));
    Vector mhat = m / bc1;
    Vector vhat = v / bc2;
    p.array() -= cfg.learning_rate * mhat.array() /
                 (vhat.array().sqrt() + kAdamEps);
}

}  // namespace

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               int t, const TrainConfig& cfg) {
    if (t < 1) throw std::invalid_argument("adam step index starts at 1");
    if (!state.initialized) {
        auto zero_like = [](const auto& m) {
            return std::decay_t<decltype(m)>::Zero(m.rows(), m.cols()).eval();
        };
        state.m = {zero_like(grads.w1), zero_like(grads.w2), zero_like(grads.w3),
                   Vector::Zero(grads.b1.size()), Vector::Zero(grads.b2.size()),
                   Vector::Zero(grads.b3.size())};
        state.v = state.m;
        state.initialized = true;
    }
    adam_update(params.w1, grads.w1, state.m.w1, state.v.w1, t, cfg);
    adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, t, cfg);
    adam_update(params.w2, grads.w2, state.m.w2, state.v.w2, t, cfg);
    adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, t, cfg);
    adam_update(params.w3, grads.w3, state.m.w3, state.v.w3, t, cfg);
    adam_update(params.b3, grads.b3, state.m.b3, state.v.b3, t, cfg);
}

namespace {

std::pair<double, double> dataset_loss_accuracy(const MlpParams& params,
                                                const LabelledMatrix& set,
                                                int batch_size) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    const Eigen::Index n = set.x.rows();
    for (Eigen::Index start = 0; start < n; start += batch_size) {
        Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
        Matrix logits = forward_eval(params, set.x.middleRows(start, len));
        std::vector<int> labels(set.y.begin() + start,
                                set.y.begin() + start + len);
        loss_sum += static_cast<double>(cross_entropy(logits, labels).loss) *
                    static_cast<double>(len);
        for (Eigen::Index i = 0; i < len; ++i) {
            Eigen::Index pred;
            logits.row(i).maxCoeff(&pred);
            if (static_cast<int>(pred) == labels[static_cast<std::size_t>(i)])
                ++correct;
        }
    }
    return {loss_sum / static_cast<double>(n),
            static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace

TrainResult train(const LabelledMatrix& train_set,
                  const LabelledMatrix& val_set, const TrainConfig& cfg) {
    if (train_set.x.rows() == 0) throw std::invalid_argument("empty train split");
    if (val_set.x.rows() == 0)
        throw std::invalid_argument("empty validation split");
    if (train_set.x.rows() != static_cast<Eigen::Index>(train_set.y.size()))
        throw std::invalid_argument("train split labels mismatch");

    MlpParams params = init_mlp(cfg.seed);
    AdamState adam;
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    DeterministicRng shuffler(cfg.seed ^ 0xd1b54a32d192ed03ULL);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    int step = 0;
    EarlyStopping stopper;
    stopper.patience = cfg.patience;
    const Eigen::Index n = train_set.x.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffler.shuffle(order);
        double train_loss_sum = 0.0;
        std::size_t train_correct = 0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            Eigen::Index len =
                std::min<Eigen::Index>(cfg.batch_size, n - start);
            Matrix xb(len, kMlpInput);
            std::vector<int> yb(static_cast<std::size_t>(len));
            for (Eigen::Index i = 0; i < len; ++i) {
                Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                xb.row(i) = train_set.x.row(src);
                yb[static_cast<std::size_t>(i)] =
                    train_set.y[static_cast<std::size_t>(src)];
            }
            ForwardCache cache;
            Matrix logits =
                forward(params, xb, ForwardMode::Train, rng, cfg.dropout_p,
                        &cache);
            LossResult lr = cross_entropy(logits, yb);
            train_loss_sum +=
                static_cast<double>(lr.loss) * static_cast<double>(len);
            for (Eigen::Index i = 0; i < len; ++i) {
                Eigen::Index pred;
                logits.row(i).maxCoeff(&pred);
                if (static_cast<int>(pred) == yb[static_cast<std::size_t>(i)])
                    ++train_correct;
            }
            MlpGrads grads = backward(params, cache, lr.dlogits);
            adam_step(params, grads, adam, ++step, cfg);
        }

        auto [val_loss, val_acc] =
            dataset_loss_accuracy(params, val_set, cfg.batch_size);
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = train_loss_sum / static_cast<double>(n);
        log.train_accuracy =
            static_cast<double>(train_correct) / static_cast<double>(n);
        log.val_loss = val_loss;
        log.val_accuracy = val_acc;
        log.improved = stopper.observe(epoch, val_loss);
        result.epochs.push_back(log);

        if (log.improved) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            result.best_params = params;
        } else if (stopper.should_stop()) {
            break;
        }
    }
    return result;
}

bool EarlyStopping::observe(int epoch, double val_loss) {
    if (val_loss < best_loss) {
        best_loss = val_loss;
        best_epoch = epoch;
        stale_epochs = 0;
        return true;
    }
    ++stale_epochs;
    return false;
}

double EvalReport::row_percent(int true_class, int predicted) const {
    std::size_t row_total = 0;
    for (int p = 0; p < kMlpOutput; ++p) row_total += confusion[true_class][p];
    return row_total
               ? static_cast<double>(confusion[true_class][predicted]) /
                     static_cast<double>(row_total) * 100.0
               : 0.0;
}

EvalReport evaluate_predictions(const std::vector<int>& truth,
                                const std::vector<int>& predicted) {
    if (truth.size() != predicted.size() || truth.empty())
        throw std::invalid_argument("evaluate: empty or mismatched inputs");
    EvalReport r;
    r.total = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++r.confusion[truth[i]][predicted[i]];
        ++r.support[truth[i]];
    }
    std::size_t trace = 0;
    for (int c = 0; c < kMlpOutput; ++c) trace += r.confusion[c][c];
    r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);

    for (int c = 0; c < kMlpOutput; ++c) {
        std::size_t tp = r.confusion[c][c];
        std::size_t pred_total = 0, true_total = r.support[c];
        for (int t = 0; t < kMlpOutput; ++t) pred_total += r.confusion[t][c];
        if (pred_total > 0)
            r.precision[c] = static_cast<double>(tp) /
                             static_cast<double>(pred_total);
        if (true_total > 0)
            r.recall[c] =
                static_cast<double>(tp) / static_cast<double>(true_total);
        if (r.precision[c] && r.recall[c] && *r.precision[c] + *r.recall[c] > 0)
            r.f1[c] = 2.0 * *r.precision[c] * *r.recall[c] /
                      (*r.precision[c] + *r.recall[c]);
    }
    return r;
}

EvalReport evaluate(const MlpParams& params, const LabelledMatrix& test_set) {
    if (test_set.x.rows() == 0)
        throw std::invalid_argument("empty test split");
    std::vector<int> predicted(test_set.y.size());
    const Eigen::Index n = test_set.x.rows();
    constexpr int batch = 256;
    for (Eigen::Index start = 0; start < n; start += batch) {
        Eigen::Index len = std::min<Eigen::Index>(batch, n - start);
        Matrix logits = forward_eval(params, test_set.x.middleRows(start, len));
        for (Eigen::Index i = 0; i < len; ++i) {
            Eigen::Index pred;
            logits.row(i).maxCoeff(&pred);
            predicted[static_cast<std::size_t>(start + i)] =
                static_cast<int>(pred);
        }
    }
    return evaluate_predictions(test_set.y, predicted);
}

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'P', 'M', 'L', 'P', '1', 0, 0};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_tensor(std::ostream& out, const float* data, std::uint32_t rows,
                  std::uint32_t cols) {
    write_u32(out, rows);
    write_u32(out, cols);
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(sizeof(float)) * rows * cols);
}

void read_tensor(std::istream& in, float* data, std::uint32_t rows,
                 std::uint32_t cols) {
    if (read_u32(in) != rows || read_u32(in) != cols)
        throw std::runtime_error("checkpoint shape mismatch");
    in.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(sizeof(float)) * rows * cols);
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpParams& params,
                     const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    write_tensor(out, params.w1.data(), kMlpHidden1, kMlpInput);
    write_tensor(out, params.b1.data(), kMlpHidden1, 1);
    write_tensor(out, params.w2.data(), kMlpHidden2, kMlpHidden1);
    write_tensor(out, params.b2.data(), kMlpHidden2, 1);
    write_tensor(out, params.w3.data(), kMlpOutput, kMlpHidden2);
    write_tensor(out, params.b3.data(), kMlpOutput, 1);
    // config echo
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "lr=%.8g wd=%.8g batch=%d dropout=%.8g max_epochs=%d "
                  "patience=%d seed=%llu",
                  static_cast<double>(cfg.learning_rate),
                  static_cast<double>(cfg.weight_decay), cfg.batch_size,
                  static_cast<double>(cfg.dropout_p), cfg.max_epochs,
                  cfg.patience, static_cast<unsigned long long>(cfg.seed));
    std::uint32_t len = static_cast<std::uint32_t>(std::strlen(buf));
    write_u32(out, len);
    out.write(buf, len);
}

MlpParams load_checkpoint(const std::string& path, TrainConfig* cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    MlpParams p;
    p.w1.resize(kMlpHidden1, kMlpInput);
    p.b1.resize(kMlpHidden1);
    p.w2.resize(kMlpHidden2, kMlpHidden1);
    p.b2.resize(kMlpHidden2);
    p.w3.resize(kMlpOutput, kMlpHidden2);
    p.b3.resize(kMlpOutput);
    read_tensor(in, p.w1.data(), kMlpHidden1, kMlpInput);
    read_tensor(in, p.b1.data(), kMlpHidden1, 1);
    read_tensor(in, p.w2.data(), kMlpHidden2, kMlpHidden1);
    read_tensor(in, p.b2.data(), kMlpHidden2, 1);
    read_tensor(in, p.w3.data(), kMlpOutput, kMlpHidden2);
    read_tensor(in, p.b3.data(), kMlpOutput, 1);
    std::uint32_t len = read_u32(in);
    std::string echo(len, '\0');
    in.read(echo.data(), len);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    if (cfg) {
        unsigned long long seed = 0;
        double lr = 0, wd = 0, dp = 0;
        int batch = 0, me = 0, pat = 0;
        if (std::sscanf(echo.c_str(),
                        "lr=%lg wd=%lg batch=%d dropout=%lg max_epochs=%d "
                        "patience=%d seed=%llu",
                        &lr, &wd, &batch, &dp, &me, &pat, &seed) == 7) {
            cfg->learning_rate = static_cast<float>(lr);
            cfg->weight_decay = static_cast<float>(wd);
            cfg->batch_size = batch;
            cfg->dropout_p = static_cast<float>(dp);
            cfg->max_epochs = me;
            cfg->patience = pat;
            cfg->seed = seed;
        }
    }
    return p;
}

}  // namespace calfplay
