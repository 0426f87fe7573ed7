#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace edf::forecast {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state. Persists across calls so that training split into
/// several chunks follows the same trajectory as one uninterrupted run.
class Adam {
public:
    Adam() = default;
    Adam(AdamConfig config, std::size_t n_params);

    void step(std::span<double> params, std::span<const double> grad);
    std::uint64_t steps() const { return t_; }

private:
    AdamConfig config_;
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
};

/// FedProx penalty (μ/2)·‖w − anchor‖².
struct ProxTerm {
    std::span<const double> anchor;
    double mu = 0.0;
};

/// Adds μ(w − anchor) to `grad`; a no-op when μ = 0.
void add_prox_gradient(std::span<double> grad, std::span<const double> params, const ProxTerm* prox);
double prox_penalty(std::span<const double> params, const ProxTerm* prox);

struct EpochStats {
    double train_loss = 0.0;
    double validation_loss = 0.0;  // NaN without validation data
    std::uint64_t ops = 0;          // arithmetic operations spent, for the energy proxy
    double seconds = 0.0;           // wall-clock duration, filled in by train_local
};

/// A model bound to one party's data plus its optimizer and shuffling state.
class LocalLearner {
public:
    virtual ~LocalLearner() = default;

    virtual std::size_t parameter_count() const = 0;
    virtual std::vector<double> initial_parameters() = 0;
    /// One pass over the training samples, followed by a validation evaluation.
    virtual EpochStats train_epoch(std::vector<double>& params, const ProxTerm* prox) = 0;
    virtual double validation_loss(std::span<const double> params) const = 0;
    virtual bool has_validation() const = 0;
    virtual std::size_t sample_count() const = 0;
};

/// Shuffled mini-batch training with Adam. Subclasses provide the batch objective.
class MinibatchLearner : public LocalLearner {
public:
    MinibatchLearner(std::size_t n_params, std::size_t n_train, std::size_t batch_size, AdamConfig adam,
                     std::uint64_t seed);

    EpochStats train_epoch(std::vector<double>& params, const ProxTerm* prox) override;
    std::size_t sample_count() const override { return n_train_; }

protected:
    /// Mean loss over `batch` (training samples); writes the mean gradient into `grad`.
    virtual double batch_loss_and_gradient(std::span<const double> params, std::span<const std::size_t> batch,
                                           std::span<double> grad, std::mt19937_64& rng) const = 0;
    virtual std::uint64_t ops_per_training_sample() const = 0;
    virtual std::uint64_t ops_per_validation_pass() const = 0;

    std::mt19937_64& rng() { return rng_; }

private:
    std::size_t n_params_;
    std::size_t n_train_;
    std::size_t batch_size_;
    Adam adam_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
};

struct LocalTrainOptions {
    std::size_t epochs = 1;
    std::size_t patience = 0;  // 0 disables early stopping and best-parameter restoration
};

struct LocalTrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_validation = 0.0;
    bool early_stopped = false;
    std::uint64_t ops() const;
};

/// Runs up to `epochs` passes. With patience > 0 and validation data, stops after `patience`
/// epochs without improvement and leaves the best-validation parameters in `params`.
/// Throws TrainingError on a non-finite loss.
LocalTrainReport train_local(LocalLearner& learner, std::vector<double>& params, const LocalTrainOptions& options,
                             const ProxTerm* prox = nullptr);

}  // namespace edf::forecast
