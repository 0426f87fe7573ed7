#include "edf/fedxgb.hpp"

#include "edf/pinball.hpp"
#include "edf/util.hpp"

#include <chrono>

namespace edf::federation {

void FedXgbPlan::validate() const {
    if (trees_per_client == 0) throw ConfigError("fedxgb: trees per client must be positive");
    if (local_epochs == 0) throw ConfigError("fedxgb: local epochs must be at least 1");
    if (batch_size == 0) throw ConfigError("fedxgb: batch size must be positive");
    if (!(mu >= 0.0)) throw ConfigError("fedxgb: proximal weight must be non-negative");
}

double AggregatedEnsemble::mean_init() const {
    double mean = 0.0;
    for (std::size_t i = 0; i < clients.size(); ++i) mean += (clients[i].init - mean) / static_cast<double>(i + 1);
    return mean;
}

std::vector<double> AggregatedEnsemble::tree_outputs(std::span<const double> x) const {
    std::vector<double> out;
    out.reserve(size());
    for (const auto& c : clients) {
        for (const auto& t : c.trees) out.push_back(t.evaluate(x));
    }
    return out;
}

AggregatedEnsemble fedxgb_aggregate_ensembles(std::vector<forecast::GbtEnsemble> clients,
                                              std::size_t trees_per_client) {
    if (clients.empty()) throw DataError("fedxgb: no client ensembles");
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (clients[i].trees.size() != trees_per_client) {
            throw DataError("fedxgb: hub " + std::to_string(i) + " contributed " +
                            std::to_string(clients[i].trees.size()) + " trees, expected " +
                            std::to_string(trees_per_client));
        }
    }
    return {trees_per_client, std::move(clients)};
}

std::size_t tree_weight_count(const AggregatedEnsemble& ensemble) { return ensemble.size() + 1; }

std::vector<double> initial_tree_weights(const AggregatedEnsemble& ensemble) {
    std::vector<double> w;
    w.reserve(tree_weight_count(ensemble));
    const auto n = static_cast<double>(ensemble.clients.size());
    for (const auto& c : ensemble.clients) w.insert(w.end(), c.trees.size(), c.learning_rate / n);
    w.push_back(ensemble.mean_init());
    return w;
}

double combine_tree_outputs(std::span<const double> weights, std::span<const double> outputs) {
    if (weights.size() != outputs.size() + 1) throw DataError("fedxgb: weight vector does not match the ensemble");
    double y = weights.back();
    for (std::size_t j = 0; j < outputs.size(); ++j) y += weights[j] * outputs[j];
    return y;
}

TreeWeightLearner::TreeWeightLearner(std::vector<double> initial, std::size_t n_outputs, std::vector<double> train_x,
                                     std::vector<double> train_y, std::vector<double> valid_x,
                                     std::vector<double> valid_y, const FedXgbPlan& plan, double alpha,
                                     std::uint64_t seed)
    : MinibatchLearner(initial.size(), train_y.size(), plan.batch_size, plan.adam, seed),
      initial_(std::move(initial)),
      n_outputs_(n_outputs),
      train_x_(std::move(train_x)),
      train_y_(std::move(train_y)),
      valid_x_(std::move(valid_x)),
      valid_y_(std::move(valid_y)),
      alpha_(alpha) {
    if (initial_.size() != n_outputs_ + 1 || train_x_.size() != train_y_.size() * n_outputs_ ||
        valid_x_.size() != valid_y_.size() * n_outputs_) {
        throw DataError("fedxgb: tree-output matrix has the wrong shape");
    }
}

double TreeWeightLearner::validation_loss(std::span<const double> params) const {
    if (valid_y_.empty()) return 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < valid_y_.size(); ++i) {
        const std::span<const double> o(valid_x_.data() + i * n_outputs_, n_outputs_);
        loss += forecast::pinball_point(valid_y_[i], combine_tree_outputs(params, o), alpha_);
    }
    return loss / static_cast<double>(valid_y_.size());
}

double TreeWeightLearner::batch_loss_and_gradient(std::span<const double> params, std::span<const std::size_t> batch,
                                                  std::span<double> grad, std::mt19937_64&) const {
    const auto n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i : batch) {
        const std::span<const double> o(train_x_.data() + i * n_outputs_, n_outputs_);
        const double y = combine_tree_outputs(params, o);
        loss += forecast::pinball_point(train_y_[i], y, alpha_);
        const double g = forecast::pinball_slope(train_y_[i], y, alpha_) / n;
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < n_outputs_; ++j) grad[j] += g * o[j];
        grad[n_outputs_] += g;
    }
    return loss / n;
}

FedXgbModel::FedXgbModel(forecast::GbtConfig config, features::FeatureMask mask, AggregatedEnsemble ensemble,
                         std::vector<double> weights)
    : config_(config), mask_(std::move(mask)), ensemble_(std::move(ensemble)) {
    set_parameters(weights);
}

nlohmann::ordered_json FedXgbModel::describe() const {
    nlohmann::ordered_json d;
    d["hyperparameters"] = {{"trees_per_client", ensemble_.trees_per_client},
                            {"clients", ensemble_.clients.size()},
                            {"max_depth", config_.max_depth},
                            {"learning_rate", config_.learning_rate},
                            {"min_samples_leaf", config_.min_samples_leaf},
                            {"alpha", config_.alpha}};
    d["feature_columns"] = features::mask_names(mask_);
    auto trees = nlohmann::ordered_json::array();
    for (const auto& c : ensemble_.clients) trees.push_back(forecast::GbtModel(config_, mask_, c).parameters());
    d["client_ensembles"] = std::move(trees);
    return d;
}

std::vector<forecast::ParameterBlock> FedXgbModel::layout() const {
    return {{"tree_weights", 0, ensemble_.size()}, {"bias", ensemble_.size(), 1}};
}

void FedXgbModel::set_parameters(std::span<const double> params) {
    if (params.size() != tree_weight_count(ensemble_)) throw DataError("fedxgb: weight vector has the wrong length");
    weights_.assign(params.begin(), params.end());
}

double FedXgbModel::predict_normalized(std::span<const double> masked_row) const {
    return combine_tree_outputs(weights_, ensemble_.tree_outputs(masked_row));
}

std::vector<double> FedXgbModel::predict(const features::FeatureFrame& frame, std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t k : rows) {
        out.push_back(forecast::to_kw(predict_normalized(forecast::masked_row(frame, k, mask_)), frame.power_scale_kw));
    }
    return out;
}

std::unique_ptr<FedXgbModel> FedXgbModel::restore(const nlohmann::ordered_json& description,
                                                  std::span<const double> params) {
    const auto& h = description.at("hyperparameters");
    forecast::GbtConfig cfg;
    cfg.max_depth = h.at("max_depth").get<std::size_t>();
    cfg.learning_rate = h.at("learning_rate").get<double>();
    cfg.min_samples_leaf = h.at("min_samples_leaf").get<std::size_t>();
    cfg.alpha = h.at("alpha").get<double>();
    const auto m = h.at("trees_per_client").get<std::size_t>();
    cfg.n_estimators = m;
    auto mask = features::parse_mask(description.at("feature_columns").get<std::vector<std::string>>());
    std::vector<forecast::GbtEnsemble> clients;
    for (const auto& flat : description.at("client_ensembles")) {
        forecast::GbtModel g(cfg, mask, {});
        g.set_parameters(flat.get<std::vector<double>>());
        clients.push_back(g.ensemble());
    }
    auto ensemble = fedxgb_aggregate_ensembles(std::move(clients), m);
    return std::make_unique<FedXgbModel>(cfg, std::move(mask), std::move(ensemble),
                                         std::vector<double>(params.begin(), params.end()));
}

FedXgbResult fit_fedxgb(std::span<const forecast::TabularData> train, std::span<const forecast::TabularData> validation,
                        const features::FeatureMask& mask, const forecast::GbtConfig& gbt, const FedXgbPlan& plan,
                        const LedgerTag* tag) {
    plan.validate();
    if (train.empty() || train.size() != validation.size()) throw DataError("fedxgb: one dataset per hub required");
    forecast::GbtConfig local = gbt;
    local.n_estimators = plan.trees_per_client;

    std::vector<forecast::GbtEnsemble> ensembles;
    for (std::size_t hub = 0; hub < train.size(); ++hub) {
        if (train[hub].n_features != mask.size()) throw DataError("fedxgb: column count does not match the mask");
        std::uint64_t ops = 0;
        const auto started = std::chrono::steady_clock::now();
        try {
            ensembles.push_back(forecast::fit_gbt_ensemble(train[hub], local, &ops));
        } catch (const std::exception& e) {
            throw TrainingError("hub-" + std::to_string(hub) + " tree fit: " + e.what());
        }
        if (tag != nullptr && tag->ledger != nullptr) {
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            tag->ledger->record(tag->model, tag->phase, "hub-" + std::to_string(hub), 0, 1, {ops, seconds});
        }
    }
    AggregatedEnsemble ensemble = fedxgb_aggregate_ensembles(std::move(ensembles), plan.trees_per_client);
    const std::vector<double> init = initial_tree_weights(ensemble);

    auto outputs_of = [&](const forecast::TabularData& d) {
        std::vector<double> x;
        x.reserve(d.rows() * ensemble.size());
        for (std::size_t i = 0; i < d.rows(); ++i) {
            const auto o = ensemble.tree_outputs(d.row(i));
            x.insert(x.end(), o.begin(), o.end());
        }
        return x;
    };
    std::vector<std::unique_ptr<TreeWeightLearner>> learners;
    std::vector<forecast::LocalLearner*> clients;
    for (std::size_t hub = 0; hub < train.size(); ++hub) {
        learners.push_back(std::make_unique<TreeWeightLearner>(init, ensemble.size(), outputs_of(train[hub]), train[hub].y,
                                                               outputs_of(validation[hub]), validation[hub].y, plan,
                                                               gbt.alpha, plan.seed + hub));
        clients.push_back(learners.back().get());
    }

    FederationPlan weights_plan;
    weights_plan.rounds = plan.rounds;
    weights_plan.local_epochs = plan.local_epochs;
    weights_plan.local_patience = plan.patience;
    weights_plan.strategy = plan.strategy;
    weights_plan.mu = plan.mu;
    weights_plan.seed = plan.seed;
    FederationResult fed = run_federation(weights_plan, clients, tag);

    FedXgbResult result;
    result.model = std::make_unique<FedXgbModel>(local, mask, std::move(ensemble), std::move(fed.global));
    result.log = std::move(fed.log);
    return result;
}

}  // namespace edf::federation
