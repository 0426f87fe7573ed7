#include "edf/pinball.hpp"

#include "edf/util.hpp"

namespace edf::forecast {

void PinballConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("pinball alpha must lie in (0, 1)");
}

double pinball_loss(std::span<const double> y, std::span<const double> yhat, double alpha) {
    if (y.size() != yhat.size()) throw DataError("pinball loss: length mismatch");
    if (y.empty()) throw DataError("pinball loss: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += pinball_point(y[i], yhat[i], alpha);
    return total / static_cast<double>(y.size());
}

std::vector<double> pinball_subgradient(std::span<const double> y, std::span<const double> yhat, double alpha) {
    if (y.size() != yhat.size()) throw DataError("pinball subgradient: length mismatch");
    std::vector<double> grad(y.size(), 0.0);
    const double n = static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) grad[i] = pinball_slope(y[i], yhat[i], alpha) / n;
    return grad;
}

}  // namespace edf::forecast
