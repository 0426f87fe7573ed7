#pragma once

#include "edf/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace edf::forecast {

struct GbtConfig {
    std::size_t n_estimators = 50;
    std::size_t max_depth = 5;
    double learning_rate = 0.1;
    std::size_t min_samples_leaf = 100;
    double alpha = 0.7;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

/// Binary regression tree; x[feature] <= threshold routes left.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    double evaluate(std::span<const double> x) const;
};

/// Dense row-major design matrix with a target column.
struct TabularData {
    std::size_t n_features = 0;
    std::vector<double> x;
    std::vector<double> y;

    std::size_t rows() const { return y.size(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(x).subspan(i * n_features, n_features);
    }
};

/// Inverse empirical CDF at alpha: the smallest sample v with F(v) >= alpha. This value
/// minimizes the pinball loss over constants.
double empirical_quantile(std::vector<double> values, double alpha);

/// Boosted ensemble in normalized target space: init + η·Σ tree(x).
struct GbtEnsemble {
    double init = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;

    double predict_row(std::span<const double> x) const;
    /// Raw leaf values of every tree, before the learning-rate scaling.
    std::vector<double> tree_outputs(std::span<const double> x) const;
};

/// Pinball-loss boosting: quantile init, then each stage fits a depth-limited tree to the
/// negative per-sample subgradient by exact greedy search (hessian 1, no regularization).
/// Leaves hold the mean negative subgradient of their rows. Ties between equal-gain splits go
/// to the lowest feature index, then the lowest threshold. Throws DataError on zero rows.
GbtEnsemble fit_gbt_ensemble(const TabularData& data, const GbtConfig& config, std::uint64_t* ops = nullptr);

class GbtModel final : public ForecastModel {
public:
    GbtModel(GbtConfig config, features::FeatureMask mask, GbtEnsemble ensemble, std::uint64_t seed = 0);

    std::string family() const override { return "gbt"; }
    nlohmann::ordered_json describe() const override;
    std::vector<double> parameters() const override;
    std::vector<ParameterBlock> layout() const override;
    void set_parameters(std::span<const double> params) override;
    std::vector<double> predict(const features::FeatureFrame& frame,
                                std::span<const std::size_t> rows) const override;

    /// Normalized-space prediction for one masked feature row.
    double predict_normalized(std::span<const double> masked_row) const { return ensemble_.predict_row(masked_row); }

    const GbtEnsemble& ensemble() const { return ensemble_; }
    const GbtConfig& config() const { return config_; }
    const features::FeatureMask& mask() const { return mask_; }

    static std::unique_ptr<GbtModel> restore(const nlohmann::ordered_json& description, std::span<const double> params);

private:
    GbtConfig config_;
    features::FeatureMask mask_;
    GbtEnsemble ensemble_;
    std::uint64_t seed_;
};

/// Masked rows of the given role from every frame, in frame order then row order.
TabularData make_tabular(std::span<const features::FeatureFrame> frames, const features::FeatureMask& mask,
                         features::Role role);

/// Masked values of one frame row.
std::vector<double> masked_row(const features::FeatureFrame& frame, std::size_t k, const features::FeatureMask& mask);

/// The seed is recorded for provenance; the greedy search itself is deterministic.
GbtModel fit_gbt(const TabularData& rows, const features::FeatureMask& mask, const GbtConfig& config,
                 std::uint64_t seed);

}  // namespace edf::forecast
