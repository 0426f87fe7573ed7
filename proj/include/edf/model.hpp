#pragma once

#include "edf/features.hpp"

#include "json.hpp"

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace edf::forecast {

/// Named slice of a model's flat parameter vector.
struct ParameterBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct FitInfo {
    std::size_t epochs_run = 0;
    std::vector<double> train_losses;
    std::vector<double> validation_losses;
    std::uint64_t ops = 0;
    std::vector<std::uint64_t> epoch_ops;  // per epoch, for the energy ledger
    std::vector<double> epoch_seconds;
    bool warning = false;  // set when a fit needed a numerical fallback
    std::string note;
};

/// Common surface of every forecaster family. Forecasts are one bin ahead: row k of a
/// feature frame yields a forecast for bin k+1, in kW, finite and non-negative.
class ForecastModel {
public:
    virtual ~ForecastModel() = default;

    virtual std::string family() const = 0;
    /// Hyperparameters, vocabularies and feature columns; enough to rebuild the model around
    /// its parameter vector.
    virtual nlohmann::ordered_json describe() const = 0;
    virtual std::vector<double> parameters() const = 0;
    virtual std::vector<ParameterBlock> layout() const = 0;
    virtual void set_parameters(std::span<const double> params) = 0;
    virtual std::vector<double> predict(const features::FeatureFrame& frame,
                                        std::span<const std::size_t> rows) const = 0;

    const FitInfo& fit_info() const { return fit_info_; }
    FitInfo& mutable_fit_info() { return fit_info_; }

protected:
    FitInfo fit_info_;
};

/// Clamps to ≥ 0 and converts non-finite outputs to 0 after denormalizing.
double to_kw(double normalized, double power_scale_kw);

struct LoadedModel {
    std::unique_ptr<ForecastModel> model;
    features::NormalizationSpec normalization;
};

/// Self-describing JSON container; parameters round-trip bit-exactly.
void save_model(std::ostream& out, const ForecastModel& model, const features::NormalizationSpec& normalization);
LoadedModel load_model(std::istream& in);

}  // namespace edf::forecast
