#include "edf/gbt.hpp"

#include "edf/pinball.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace edf::forecast {

void GbtConfig::validate() const {
    if (n_estimators == 0) throw ConfigError("gbt: n_estimators must be positive");
    if (max_depth == 0) throw ConfigError("gbt: max_depth must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("gbt: learning rate must be positive");
    if (min_samples_leaf == 0) throw ConfigError("gbt: min_samples_leaf must be positive");
    PinballConfig{alpha}.validate();
}

double RegressionTree::evaluate(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

double empirical_quantile(std::vector<double> values, double alpha) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(alpha * n - 1e-12));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

double GbtEnsemble::predict_row(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.evaluate(x);
    return init + learning_rate * sum;
}

std::vector<double> GbtEnsemble::tree_outputs(std::span<const double> x) const {
    std::vector<double> out;
    out.reserve(trees.size());
    for (const auto& tree : trees) out.push_back(tree.evaluate(x));
    return out;
}

namespace {

struct SplitCandidate {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const TabularData& data, std::span<const double> neg_grad, const GbtConfig& config)
        : data_(data), neg_grad_(neg_grad), config_(config) {}

    RegressionTree build(std::vector<std::size_t> rows) {
        RegressionTree tree;
        grow(tree, std::move(rows), 0);
        return tree;
    }

    std::uint64_t ops() const { return ops_; }

private:
    double leaf_value(const std::vector<std::size_t>& rows) const {
        double sum = 0.0;
        for (std::size_t r : rows) sum += neg_grad_[r];
        return sum / static_cast<double>(rows.size());
    }

    SplitCandidate best_split(const std::vector<std::size_t>& rows) {
        SplitCandidate best;
        const std::size_t n = rows.size();
        if (n < 2 * config_.min_samples_leaf) return best;
        double total = 0.0;
        double total_sq = 0.0;
        for (std::size_t r : rows) {
            total += neg_grad_[r];
            total_sq += neg_grad_[r] * neg_grad_[r];
        }
        const double parent = total * total / static_cast<double>(n);
        // Gains closer than this are treated as ties so that the lowest feature/threshold wins
        // regardless of summation order.
        const double tie_tolerance = 1e-12 * total_sq;

        std::vector<std::size_t> sorted(rows);
        const auto steps = static_cast<std::uint64_t>(std::ceil(std::log2(static_cast<double>(n) + 1.0)));
        for (std::size_t f = 0; f < data_.n_features; ++f) {
            std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                return data_.x[a * data_.n_features + f] < data_.x[b * data_.n_features + f];
            });
            ops_ += static_cast<std::uint64_t>(n) * (steps + 1);
            double left = 0.0;
            for (std::size_t j = 0; j + 1 < n; ++j) {
                left += neg_grad_[sorted[j]];
                const double v = data_.x[sorted[j] * data_.n_features + f];
                const double next = data_.x[sorted[j + 1] * data_.n_features + f];
                if (!(v < next)) continue;
                const std::size_t n_left = j + 1;
                const std::size_t n_right = n - n_left;
                if (n_left < config_.min_samples_leaf || n_right < config_.min_samples_leaf) continue;
                const double right = total - left;
                const double gain = left * left / static_cast<double>(n_left) +
                                    right * right / static_cast<double>(n_right) - parent;
                const double bar = best.found ? best.gain + tie_tolerance : tie_tolerance;
                if (gain > bar) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = v;
                    best.gain = gain;
                }
            }
        }
        return best;
    }

    int grow(RegressionTree& tree, std::vector<std::size_t> rows, std::size_t depth) {
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        SplitCandidate split;
        if (depth < config_.max_depth) split = best_split(rows);
        if (!split.found) {
            tree.nodes[static_cast<std::size_t>(index)].value = leaf_value(rows);
            return index;
        }
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : rows) {
            (data_.x[r * data_.n_features + split.feature] <= split.threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int left = grow(tree, std::move(left_rows), depth + 1);
        const int right = grow(tree, std::move(right_rows), depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
        node.feature = static_cast<int>(split.feature);
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        return index;
    }

    const TabularData& data_;
    std::span<const double> neg_grad_;
    const GbtConfig& config_;
    std::uint64_t ops_ = 0;
};

}  // namespace

GbtEnsemble fit_gbt_ensemble(const TabularData& data, const GbtConfig& config, std::uint64_t* ops) {
    config.validate();
    const std::size_t n = data.rows();
    if (n == 0) throw DataError("gbt: no training rows");
    if (data.x.size() != n * data.n_features) throw DataError("gbt: design matrix shape mismatch");

    GbtEnsemble ensemble;
    ensemble.learning_rate = config.learning_rate;
    ensemble.init = empirical_quantile(data.y, config.alpha);

    std::vector<double> pred(n, ensemble.init);
    std::vector<double> neg_grad(n, 0.0);
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    std::uint64_t total_ops = 0;
    for (std::size_t m = 0; m < config.n_estimators; ++m) {
        for (std::size_t i = 0; i < n; ++i) neg_grad[i] = -pinball_slope(data.y[i], pred[i], config.alpha);
        TreeBuilder builder(data, neg_grad, config);
        RegressionTree tree = builder.build(all_rows);
        for (std::size_t i = 0; i < n; ++i) pred[i] += config.learning_rate * tree.evaluate(data.row(i));
        total_ops += builder.ops() + 2 * static_cast<std::uint64_t>(n) * (config.max_depth + 1);
        ensemble.trees.push_back(std::move(tree));
    }
    if (ops != nullptr) *ops = total_ops;
    return ensemble;
}

GbtModel::GbtModel(GbtConfig config, features::FeatureMask mask, GbtEnsemble ensemble, std::uint64_t seed)
    : config_(config), mask_(std::move(mask)), ensemble_(std::move(ensemble)), seed_(seed) {}

nlohmann::ordered_json GbtModel::describe() const {
    nlohmann::ordered_json d;
    d["hyperparameters"] = {{"n_estimators", config_.n_estimators},
                            {"max_depth", config_.max_depth},
                            {"learning_rate", config_.learning_rate},
                            {"min_samples_leaf", config_.min_samples_leaf},
                            {"alpha", config_.alpha},
                            {"seed", seed_}};
    d["feature_columns"] = features::mask_names(mask_);
    return d;
}

std::vector<double> GbtModel::parameters() const {
    std::vector<double> p{ensemble_.init};
    for (const auto& tree : ensemble_.trees) {
        p.push_back(static_cast<double>(tree.nodes.size()));
        for (const auto& n : tree.nodes) {
            p.insert(p.end(), {static_cast<double>(n.feature), n.threshold, static_cast<double>(n.left),
                               static_cast<double>(n.right), n.value});
        }
    }
    return p;
}

std::vector<ParameterBlock> GbtModel::layout() const {
    std::vector<ParameterBlock> blocks{{"init", 0, 1}};
    std::size_t offset = 1;
    for (std::size_t t = 0; t < ensemble_.trees.size(); ++t) {
        const std::size_t size = 1 + 5 * ensemble_.trees[t].nodes.size();
        blocks.push_back({"tree[" + std::to_string(t) + "]", offset, size});
        offset += size;
    }
    return blocks;
}

void GbtModel::set_parameters(std::span<const double> params) {
    if (params.empty()) throw DataError("gbt: empty parameter vector");
    GbtEnsemble e;
    e.learning_rate = config_.learning_rate;
    e.init = params[0];
    std::size_t pos = 1;
    while (pos < params.size()) {
        const auto n_nodes = static_cast<std::size_t>(params[pos++]);
        if (n_nodes == 0 || pos + 5 * n_nodes > params.size()) throw DataError("gbt: malformed tree block");
        RegressionTree tree;
        for (std::size_t i = 0; i < n_nodes; ++i, pos += 5) {
            TreeNode n;
            n.feature = static_cast<int>(params[pos]);
            n.threshold = params[pos + 1];
            n.left = static_cast<int>(params[pos + 2]);
            n.right = static_cast<int>(params[pos + 3]);
            n.value = params[pos + 4];
            const auto in_range = [n_nodes](int child) { return child > 0 && static_cast<std::size_t>(child) < n_nodes; };
            if (!n.is_leaf() && (static_cast<std::size_t>(n.feature) >= mask_.size() || !in_range(n.left) ||
                                 !in_range(n.right))) {
                throw DataError("gbt: tree node references out of range");
            }
            tree.nodes.push_back(n);
        }
        e.trees.push_back(std::move(tree));
    }
    ensemble_ = std::move(e);
}

std::vector<double> GbtModel::predict(const features::FeatureFrame& frame, std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t k : rows) {
        const auto x = masked_row(frame, k, mask_);
        out.push_back(to_kw(ensemble_.predict_row(x), frame.power_scale_kw));
    }
    return out;
}

std::unique_ptr<GbtModel> GbtModel::restore(const nlohmann::ordered_json& description, std::span<const double> params) {
    const auto& h = description.at("hyperparameters");
    GbtConfig cfg;
    cfg.n_estimators = h.at("n_estimators").get<std::size_t>();
    cfg.max_depth = h.at("max_depth").get<std::size_t>();
    cfg.learning_rate = h.at("learning_rate").get<double>();
    cfg.min_samples_leaf = h.at("min_samples_leaf").get<std::size_t>();
    cfg.alpha = h.at("alpha").get<double>();
    auto mask = features::parse_mask(description.at("feature_columns").get<std::vector<std::string>>());
    auto model = std::make_unique<GbtModel>(cfg, std::move(mask), GbtEnsemble{}, h.at("seed").get<std::uint64_t>());
    model->set_parameters(params);
    return model;
}

std::vector<double> masked_row(const features::FeatureFrame& frame, std::size_t k, const features::FeatureMask& mask) {
    std::vector<double> x;
    x.reserve(mask.size());
    for (features::Column c : mask) x.push_back(frame.at(k, c));
    return x;
}

TabularData make_tabular(std::span<const features::FeatureFrame> frames, const features::FeatureMask& mask,
                         features::Role role) {
    TabularData data;
    data.n_features = mask.size();
    for (const auto& frame : frames) {
        for (std::size_t k : frame.rows_for(role)) {
            const auto x = masked_row(frame, k, mask);
            data.x.insert(data.x.end(), x.begin(), x.end());
            data.y.push_back(frame.target[k]);
        }
    }
    return data;
}

GbtModel fit_gbt(const TabularData& rows, const features::FeatureMask& mask, const GbtConfig& config,
                 std::uint64_t seed) {
    if (rows.n_features != mask.size()) throw DataError("gbt: column count does not match the feature mask");
    std::uint64_t ops = 0;
    const auto started = std::chrono::steady_clock::now();
    GbtEnsemble ensemble = fit_gbt_ensemble(rows, config, &ops);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    GbtModel model(config, mask, std::move(ensemble), seed);
    FitInfo& info = model.mutable_fit_info();
    info.epochs_run = 1;
    info.ops = ops;
    info.epoch_ops = {ops};
    info.epoch_seconds = {seconds};
    std::vector<double> pred(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) pred[i] = model.predict_normalized(rows.row(i));
    info.train_losses.push_back(pinball_loss(rows.y, pred, config.alpha));
    return model;
}

}  // namespace edf::forecast
