#include "edf/kmeans.hpp"

#include "edf/util.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace edf::federation {

namespace {

constexpr std::size_t kMaxIterations = 100;

double dist2(const ingest::GeoPoint& a, const ingest::GeoPoint& b) {
    const double dl = a.lat - b.lat;
    const double dn = a.lon - b.lon;
    return dl * dl + dn * dn;
}

std::size_t nearest(const ingest::GeoPoint& p, const std::vector<ingest::GeoPoint>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = dist2(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<ingest::GeoPoint> plus_plus_init(const std::vector<ingest::GeoPoint>& points, std::size_t k,
                                             std::mt19937_64& rng) {
    std::vector<ingest::GeoPoint> centroids;
    centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d2[i] = dist2(points[i], centroids[nearest(points[i], centroids)]);
            total += d2[i];
        }
        // Enough distinct locations guarantee total > 0.
        const double pick = std::uniform_real_distribution<double>(0.0, total)(rng);
        double acc = 0.0;
        std::size_t chosen = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            chosen = i;
            if (acc > pick) break;
        }
        centroids.push_back(points[chosen]);
    }
    return centroids;
}

}  // namespace

std::vector<std::vector<std::string>> HubAssignment::members() const {
    std::vector<std::vector<std::string>> out(k);
    for (const auto& [id, hub] : evse_to_hub) out[hub].push_back(id);
    return out;
}

HubAssignment cluster_hubs(const std::vector<std::pair<std::string, ingest::GeoPoint>>& locations, std::size_t k,
                           std::uint64_t seed) {
    if (k == 0) throw ConfigError("hub count must be at least 1");
    auto sorted = locations;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ingest::GeoPoint> points;
    std::set<ingest::GeoPoint> distinct;
    for (const auto& [id, p] : sorted) {
        points.push_back(p);
        distinct.insert(p);
    }
    if (k > distinct.size()) {
        throw ConfigError("hub count " + std::to_string(k) + " exceeds the " + std::to_string(distinct.size()) +
                          " distinct EVSE locations");
    }

    std::mt19937_64 rng(seed);
    std::vector<ingest::GeoPoint> centroids = plus_plus_init(points, k, rng);
    std::vector<std::size_t> assign(points.size(), k);
    for (std::size_t iter = 0; iter <= kMaxIterations; ++iter) {
        std::vector<std::size_t> next(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) next[i] = nearest(points[i], centroids);
        for (std::size_t c = 0; c < k; ++c) {
            if (std::find(next.begin(), next.end(), c) != next.end()) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d = dist2(points[i], centroids[next[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            centroids[c] = points[far];
            next[far] = c;
        }
        const bool converged = next == assign;
        assign = std::move(next);
        if (converged || iter == kMaxIterations) break;
        std::vector<ingest::GeoPoint> sums(k, {0.0, 0.0});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            sums[assign[i]].lat += points[i].lat;
            sums[assign[i]].lon += points[i].lon;
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            centroids[c] = {sums[c].lat / static_cast<double>(counts[c]), sums[c].lon / static_cast<double>(counts[c])};
        }
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centroids[a] < centroids[b]; });
    std::vector<std::size_t> rank(k);
    HubAssignment out;
    out.k = k;
    for (std::size_t r = 0; r < k; ++r) {
        rank[order[r]] = r;
        out.centroids.push_back(centroids[order[r]]);
    }
    for (std::size_t i = 0; i < points.size(); ++i) out.evse_to_hub[sorted[i].first] = rank[assign[i]];
    return out;
}

}  // namespace edf::federation
