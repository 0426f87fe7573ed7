#include "edf/training.hpp"

#include "edf/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace edf::forecast {

Adam::Adam(AdamConfig config, std::size_t n_params)
    : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
        v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = m_[i] / correction1;
        const double v_hat = v_[i] / correction2;
        params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

void add_prox_gradient(std::span<double> grad, std::span<const double> params, const ProxTerm* prox) {
    if (prox == nullptr || prox->mu == 0.0) return;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += prox->mu * (params[i] - prox->anchor[i]);
}

double prox_penalty(std::span<const double> params, const ProxTerm* prox) {
    if (prox == nullptr || prox->mu == 0.0) return 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = params[i] - prox->anchor[i];
        ss += d * d;
    }
    return 0.5 * prox->mu * ss;
}

MinibatchLearner::MinibatchLearner(std::size_t n_params, std::size_t n_train, std::size_t batch_size,
                                   AdamConfig adam, std::uint64_t seed)
    : n_params_(n_params), n_train_(n_train), batch_size_(batch_size), adam_(adam, n_params), rng_(seed) {
    if (batch_size_ == 0) throw ConfigError("batch size must be positive");
    order_.resize(n_train_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
}

EpochStats MinibatchLearner::train_epoch(std::vector<double>& params, const ProxTerm* prox) {
    if (n_train_ == 0) throw TrainingError("empty training set");
    std::shuffle(order_.begin(), order_.end(), rng_);
    std::vector<double> grad(n_params_, 0.0);
    double weighted_loss = 0.0;
    for (std::size_t begin = 0; begin < n_train_; begin += batch_size_) {
        const std::size_t end = std::min(n_train_, begin + batch_size_);
        const std::span<const std::size_t> batch(order_.data() + begin, end - begin);
        std::fill(grad.begin(), grad.end(), 0.0);
        const double loss = batch_loss_and_gradient(params, batch, grad, rng_);
        if (!std::isfinite(loss)) {
            throw TrainingError("non-finite training loss at batch starting at sample " + std::to_string(begin));
        }
        add_prox_gradient(grad, params, prox);
        adam_.step(params, grad);
        weighted_loss += loss * static_cast<double>(batch.size());
    }
    EpochStats stats;
    stats.train_loss = weighted_loss / static_cast<double>(n_train_);
    stats.validation_loss =
        has_validation() ? validation_loss(params) : std::numeric_limits<double>::quiet_NaN();
    stats.ops = ops_per_training_sample() * n_train_ + (has_validation() ? ops_per_validation_pass() : 0);
    return stats;
}

std::uint64_t LocalTrainReport::ops() const {
    std::uint64_t total = 0;
    for (const auto& e : epochs) total += e.ops;
    return total;
}

LocalTrainReport train_local(LocalLearner& learner, std::vector<double>& params, const LocalTrainOptions& options,
                             const ProxTerm* prox) {
    LocalTrainReport report;
    const bool early_stopping = options.patience > 0 && learner.has_validation();
    std::vector<double> best_params;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    for (std::size_t e = 0; e < options.epochs; ++e) {
        const auto started = std::chrono::steady_clock::now();
        EpochStats stats = learner.train_epoch(params, prox);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        report.epochs.push_back(stats);
        if (!early_stopping) continue;
        if (!std::isfinite(stats.validation_loss)) throw TrainingError("non-finite validation loss");
        if (stats.validation_loss < best) {
            best = stats.validation_loss;
            best_params = params;
            report.best_epoch = e;
            since_best = 0;
        } else if (++since_best >= options.patience) {
            report.early_stopped = true;
            break;
        }
    }
    if (early_stopping && !best_params.empty()) params = std::move(best_params);
    report.best_validation = early_stopping ? best : std::numeric_limits<double>::quiet_NaN();
    if (!early_stopping && !report.epochs.empty()) {
        report.best_epoch = report.epochs.size() - 1;
        report.best_validation = report.epochs.back().validation_loss;
    }
    return report;
}

}  // namespace edf::forecast
