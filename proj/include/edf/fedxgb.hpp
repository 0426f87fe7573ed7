#pragma once

#include "edf/federation.hpp"
#include "edf/gbt.hpp"

#include <memory>
#include <span>
#include <vector>

namespace edf::federation {

struct FedXgbPlan {
    std::size_t trees_per_client = 37;
    std::size_t rounds = 40;
    std::size_t local_epochs = 10;
    std::size_t patience = 3;
    Strategy strategy = Strategy::FedAvg;
    double mu = 0.1;
    std::size_t batch_size = 32;
    forecast::AdamConfig adam;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Client ensembles frozen after training, ordered by hub id.
struct AggregatedEnsemble {
    std::size_t trees_per_client = 0;
    std::vector<forecast::GbtEnsemble> clients;

    std::size_t size() const { return clients.size() * trees_per_client; }
    double mean_init() const;
    /// Raw output of every tree, hub-major then tree index.
    std::vector<double> tree_outputs(std::span<const double> x) const;
};

/// Throws DataError when a client does not contribute exactly `trees_per_client` trees.
AggregatedEnsemble fedxgb_aggregate_ensembles(std::vector<forecast::GbtEnsemble> clients,
                                              std::size_t trees_per_client);

/// One learnable weight per tree plus a bias: ŷ = b + Σ_j w_j·tree_j(x).
std::size_t tree_weight_count(const AggregatedEnsemble& ensemble);
/// w_j = η/N and b = mean client init, which reproduces the average of the clients' own
/// boosted predictions.
std::vector<double> initial_tree_weights(const AggregatedEnsemble& ensemble);
double combine_tree_outputs(std::span<const double> weights, std::span<const double> outputs);

/// A hub's tree-output vectors and targets, trained with Adam on the pinball loss.
class TreeWeightLearner final : public forecast::MinibatchLearner {
public:
    TreeWeightLearner(std::vector<double> initial, std::size_t n_outputs, std::vector<double> train_x,
                      std::vector<double> train_y, std::vector<double> valid_x, std::vector<double> valid_y,
                      const FedXgbPlan& plan, double alpha, std::uint64_t seed);

    std::size_t parameter_count() const override { return initial_.size(); }
    std::vector<double> initial_parameters() override { return initial_; }
    double validation_loss(std::span<const double> params) const override;
    bool has_validation() const override { return !valid_y_.empty(); }

protected:
    double batch_loss_and_gradient(std::span<const double> params, std::span<const std::size_t> batch,
                                   std::span<double> grad, std::mt19937_64& rng) const override;
    std::uint64_t ops_per_training_sample() const override { return 4 * initial_.size(); }
    std::uint64_t ops_per_validation_pass() const override { return 2 * initial_.size() * valid_y_.size(); }

private:
    std::vector<double> initial_;
    std::size_t n_outputs_;
    std::vector<double> train_x_, train_y_, valid_x_, valid_y_;
    double alpha_;
};

class FedXgbModel final : public forecast::ForecastModel {
public:
    FedXgbModel(forecast::GbtConfig config, features::FeatureMask mask, AggregatedEnsemble ensemble,
                std::vector<double> weights);

    std::string family() const override { return "fedxgb"; }
    /// Carries the frozen trees of every client alongside the hyperparameters.
    nlohmann::ordered_json describe() const override;
    std::vector<double> parameters() const override { return weights_; }
    std::vector<forecast::ParameterBlock> layout() const override;
    void set_parameters(std::span<const double> params) override;
    std::vector<double> predict(const features::FeatureFrame& frame,
                                std::span<const std::size_t> rows) const override;

    double predict_normalized(std::span<const double> masked_row) const;
    const AggregatedEnsemble& ensemble() const { return ensemble_; }

    static std::unique_ptr<FedXgbModel> restore(const nlohmann::ordered_json& description,
                                                std::span<const double> params);

private:
    forecast::GbtConfig config_;
    features::FeatureMask mask_;
    AggregatedEnsemble ensemble_;
    std::vector<double> weights_;
};

struct FedXgbResult {
    std::unique_ptr<FedXgbModel> model;
    RoundLog log;
};

/// Each hub boosts `trees_per_client` trees on its own training rows; the server concatenates
/// them and the hubs then learn the tree weights federatedly. GBT fitting and weight training
/// are both booked on the ledger (round 0 holds the tree fits).
FedXgbResult fit_fedxgb(std::span<const forecast::TabularData> train, std::span<const forecast::TabularData> validation,
                        const features::FeatureMask& mask, const forecast::GbtConfig& gbt, const FedXgbPlan& plan,
                        const LedgerTag* tag = nullptr);

}  // namespace edf::federation
