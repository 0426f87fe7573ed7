#pragma once

#include "edf/model.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace edf::forecast {

struct ArxConfig {
    std::size_t order = 48;
    features::FeatureMask exogenous = features::arx_exogenous_mask();
    bool seasonal_dummies = false;
    std::size_t seasonal_period = 14;  // one week of 12-hour bins

    /// Throws ConfigError unless 1 ≤ order ≤ series_length / 4.
    void validate(std::size_t series_length) const;
};

/// Coefficients ordered [lag 1..p, exogenous..., seasonal dummies 1..s-1, intercept].
struct ArxFit {
    std::size_t order = 0;
    std::size_t n_exogenous = 0;
    std::size_t n_dummies = 0;
    std::vector<double> coefficients;
    bool ridge_fallback = false;

    /// `history` holds y_{t-1}, y_{t-2}, ... (newest first, at least `order` values).
    double predict(std::span<const double> history, std::span<const double> exogenous, std::size_t t) const;
};

/// Conditional least squares on y_t = Σ a_j y_{t-j} + βᵀx_t + dummies(t) + c for t ≥ p, where
/// row t of `exogenous` is the covariate vector aligned with y_t (its column count overrides
/// the config's mask). Constant columns are dropped (coefficient 0); a rank-deficient design
/// falls back to ridge with penalty 1e-8 and sets `ridge_fallback`. Throws DataError when
/// length ≤ p + regressors + 1.
ArxFit fit_arx_series(std::span<const double> y, const Eigen::MatrixXd& exogenous, const ArxConfig& config);

/// One linear autoregression per EVSE.
class ArxModel final : public ForecastModel {
public:
    ArxModel(ArxConfig config, std::map<std::string, ArxFit> fits);

    std::string family() const override { return "arx"; }
    nlohmann::ordered_json describe() const override;
    std::vector<double> parameters() const override;
    std::vector<ParameterBlock> layout() const override;
    void set_parameters(std::span<const double> params) override;
    /// Throws DataError for an EVSE that was not part of the fit.
    std::vector<double> predict(const features::FeatureFrame& frame,
                                std::span<const std::size_t> rows) const override;

    const std::map<std::string, ArxFit>& fits() const { return fits_; }

    static std::unique_ptr<ArxModel> restore(const nlohmann::ordered_json& description, std::span<const double> params);

private:
    ArxConfig config_;
    std::map<std::string, ArxFit> fits_;
};

/// Fits every frame on its own training block. The order is lowered to a quarter of the
/// training length when the block is too short; FitInfo::note lists such EVSEs.
ArxModel fit_arx(std::span<const features::FeatureFrame> frames, const ArxConfig& config);

}  // namespace edf::forecast
