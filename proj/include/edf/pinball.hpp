#pragma once

#include <span>
#include <vector>

namespace edf::forecast {

struct PinballConfig {
    double alpha = 0.7;

    void validate() const;
};

/// Mean over elements of max(α·r, (α−1)·r) with r = y − ŷ. Throws DataError on length mismatch
/// or empty input.
double pinball_loss(std::span<const double> y, std::span<const double> yhat, double alpha);

/// d loss / d ŷ_i: −α/n when y_i > ŷ_i, (1−α)/n when y_i < ŷ_i, 0 at the kink.
std::vector<double> pinball_subgradient(std::span<const double> y, std::span<const double> yhat, double alpha);

/// Single-element derivative without the 1/n factor.
inline double pinball_slope(double y, double yhat, double alpha) {
    if (y > yhat) return -alpha;
    if (y < yhat) return 1.0 - alpha;
    return 0.0;
}

inline double pinball_point(double y, double yhat, double alpha) {
    const double r = y - yhat;
    return r >= 0.0 ? alpha * r : (alpha - 1.0) * r;
}

}  // namespace edf::forecast
