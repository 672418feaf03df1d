#pragma once

#include "gnet/autodiff.hpp"
#include "gnet/errors.hpp"
#include "gnet/graph.hpp"
#include "gnet/model.hpp"
#include "gnet/param_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace gnet {

// ---------------------------------------------------------------- Adam

struct AdamConfig {
    double lr = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t t = 0;
    std::map<std::string, AdamMoments> moments;

    AdamState() = default;
    AdamState(AdamConfig cfg, const ParamStore& params) : config(cfg) {
        for (const auto& [path, value] : params) {
            moments[path] = AdamMoments{std::vector<double>(value.size(), 0.0), std::vector<double>(value.size(), 0.0)};
        }
    }
};

/// One bias-corrected Adam update from the gradients currently held by
/// `params`. All gradients are checked for finiteness before anything moves.
inline void adam_step(AdamState& state, ParamStore& params) {
    for (const auto& [path, value] : params) {
        for (double g : value.grad()) {
            if (!std::isfinite(g)) throw training_error("adam: non-finite gradient in '" + path + "'");
        }
        auto it = state.moments.find(path);
        if (it == state.moments.end() || it->second.m.size() != value.size()) {
            throw shape_error("adam: optimizer state does not mirror parameter '" + path + "'");
        }
    }
    ++state.t;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (auto& [path, value] : params) {
        auto& mom = state.moments.at(path);
        auto data = value.data();
        auto grad = value.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
            mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = mom.m[i] / bc1;
            const double v_hat = mom.v[i] / bc2;
            data[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& [_, v] : params)
        for (double g : v.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& [_, v] : params)
            for (double& g : v.grad()) g *= s;
    }
    return norm;
}

// ---------------------------------------------------------------- metrics

/// C×C counts; rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<long long> counts;

    explicit ConfusionMatrix(int c = 0) : num_classes(c), counts(static_cast<std::size_t>(c * c), 0) {}

    void add(int truth, int predicted) { ++counts[static_cast<std::size_t>(truth * num_classes + predicted)]; }
    long long at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth * num_classes + predicted)];
    }
    long long row_sum(int truth) const {
        long long s = 0;
        for (int p = 0; p < num_classes; ++p) s += at(truth, p);
        return s;
    }
    long long total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }
    long long correct() const {
        long long s = 0;
        for (int k = 0; k < num_classes; ++k) s += at(k, k);
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct EvalMetrics {
    std::size_t num_samples = 0;
    double mean_loss = 0.0;
    std::optional<double> accuracy_recognition;
    std::optional<double> accuracy_prediction;
    std::optional<ConfusionMatrix> confusion_recognition;
    std::optional<ConfusionMatrix> confusion_prediction;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    /// Validation accuracies; NaN for a disabled branch.
    double acc_recognition = 0.0;
    double acc_prediction = 0.0;
    double seconds = 0.0;

    /// Equality of the recorded trajectory (wall-clock excluded).
    bool same_values(const EpochRecord& o) const {
        auto eq = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return epoch == o.epoch && eq(train_loss, o.train_loss) && eq(val_loss, o.val_loss) &&
               eq(acc_recognition, o.acc_recognition) && eq(acc_prediction, o.acc_prediction);
    }
};

inline bool same_history(const std::vector<EpochRecord>& a, const std::vector<EpochRecord>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(),
                                              [](const auto& x, const auto& y) { return x.same_values(y); });
}

// ---------------------------------------------------------------- evaluation

struct SampleOutcome {
    double loss = 0.0;
    int label_recognition = -1;
    int label_prediction = -1;
};

inline SampleOutcome evaluate_sample(const GNetModel& model, const Sample& s) {
    ad::NoGradGuard guard;
    Rng unused(0);
    const auto out = gnet_forward(model, s, Mode::eval, unused);
    SampleOutcome o;
    o.loss = gnet_loss(out, s.recognition_label, s.prediction_label, model.config().kl_weight).item();
    if (out.logp_recognition) o.label_recognition = decide(*out.logp_recognition).label;
    if (out.logp_prediction) o.label_prediction = decide(*out.logp_prediction).label;
    return o;
}

/// Eval-mode pass over a dataset. With threads > 1 samples are processed in
/// contiguous chunks; results are merged in sample order so the metrics do
/// not depend on the thread count.
inline EvalMetrics evaluate(const GNetModel& model, const Dataset& dataset, int threads = 1) {
    if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const auto& cfg = model.config();
    std::vector<SampleOutcome> outcomes(dataset.size());
    const std::size_t n = dataset.size();
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) outcomes[i] = evaluate_sample(model, dataset.samples[i]);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) {
                        outcomes[i] = evaluate_sample(model, dataset.samples[i]);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    EvalMetrics m;
    m.num_samples = n;
    if (cfg.enable_recognition) m.confusion_recognition = ConfusionMatrix(cfg.num_classes);
    if (cfg.enable_prediction) m.confusion_prediction = ConfusionMatrix(cfg.num_classes);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = dataset.samples[i];
        loss_sum += outcomes[i].loss;
        if (m.confusion_recognition) m.confusion_recognition->add(s.recognition_label, outcomes[i].label_recognition);
        if (m.confusion_prediction) m.confusion_prediction->add(s.prediction_label, outcomes[i].label_prediction);
    }
    m.mean_loss = loss_sum / static_cast<double>(n);
    if (m.confusion_recognition) {
        m.accuracy_recognition = static_cast<double>(m.confusion_recognition->correct()) / static_cast<double>(n);
    }
    if (m.confusion_prediction) {
        m.accuracy_prediction = static_cast<double>(m.confusion_prediction->correct()) / static_cast<double>(n);
    }
    return m;
}

/// Accuracy used for checkpoint selection: recognition when enabled,
/// prediction otherwise.
inline double selection_accuracy(const EvalMetrics& m) {
    return m.accuracy_recognition ? *m.accuracy_recognition : m.accuracy_prediction.value_or(0.0);
}

// ---------------------------------------------------------------- training loop

struct TrainConfig {
    int epochs = 200;
    std::uint64_t seed = 0;
    bool shuffle = true;
    AdamConfig adam;
    /// Global gradient-norm clip; 0 disables.
    double clip = 0.0;
    int eval_threads = 1;
};

struct TrainResult {
    ParamStore best_params;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
    std::vector<EpochRecord> history;
};

/// Trains in place (batch size 1). After each epoch the model is evaluated
/// on `val_set`; the returned best parameters are those with the highest
/// validation selection accuracy, earliest epoch on ties. With zero epochs
/// the initial parameters are returned and the history is empty.
inline TrainResult train(GNetModel& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    if (config.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    TrainResult result;
    result.best_params = model.params().clone();
    if (config.epochs == 0) return result;
    if (train_set.empty() || val_set.empty()) throw std::invalid_argument("train: empty train or validation split");

    auto& params = model.params();
    AdamState adam(config.adam, params);
    Rng rng(config.seed);
    const double beta = model.config().kl_weight;
    std::vector<std::size_t> order(train_set.size());
    std::optional<double> best;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (config.shuffle) {
            Rng shuffle_rng(config.seed + static_cast<std::uint64_t>(epoch));
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        }

        double loss_sum = 0.0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& s = train_set.samples[order[k]];
            params.zero_grad();
            const auto out = gnet_forward(model, s, Mode::train, rng);
            const auto loss = gnet_loss(out, s.recognition_label, s.prediction_label, beta);
            const double lv = loss.item();
            if (!std::isfinite(lv)) {
                throw training_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                     std::to_string(order[k]));
            }
            ad::backward(loss);
            if (config.clip > 0.0) clip_grad_norm(params, config.clip);
            try {
                adam_step(adam, params);
            } catch (const training_error& e) {
                throw training_error(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", sample " +
                                     std::to_string(order[k]));
            }
            loss_sum += lv;
        }

        const auto val = evaluate(model, val_set, config.eval_threads);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.val_loss = val.mean_loss;
        rec.acc_recognition = val.accuracy_recognition.value_or(std::nan(""));
        rec.acc_prediction = val.accuracy_prediction.value_or(std::nan(""));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.push_back(rec);

        const double acc = selection_accuracy(val);
        if (!best || acc > *best) {
            best = acc;
            result.best_epoch = epoch;
            result.best_val_accuracy = acc;
            result.best_params.assign(params);
        }
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

// ---------------------------------------------------------------- reports

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV with header `epoch,train_loss,val_loss,acc_R,acc_P`; reals are printed
/// with 17 significant digits, a disabled branch as `nan`.
inline void write_history_report(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw load_error("cannot write " + path.string());
    out << "epoch,train_loss,val_loss,acc_R,acc_P\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.val_loss) << ','
            << format_real(r.acc_recognition) << ',' << format_real(r.acc_prediction) << '\n';
    }
}

/// One header line naming the class labels, then C rows of C integers
/// (rows = true class, columns = predicted class).
inline void write_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& labels,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw load_error("cannot write " + path.string());
    out << "# rows=true cols=predicted labels:";
    for (int k = 0; k < cm.num_classes; ++k) {
        out << ' ' << (static_cast<std::size_t>(k) < labels.size() ? labels[static_cast<std::size_t>(k)] : std::to_string(k));
    }
    out << '\n';
    for (int t = 0; t < cm.num_classes; ++t) {
        for (int p = 0; p < cm.num_classes; ++p) out << (p ? " " : "") << cm.at(t, p);
        out << '\n';
    }
}

} // namespace gnet
