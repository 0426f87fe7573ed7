#pragma once

#include "edf/ingest.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace edf::federation {

/// EVSE → hub. Hub ids follow the centroids sorted by (lat, lon), so they do not depend on
/// the order in which clusters were discovered.
struct HubAssignment {
    std::size_t k = 0;
    std::vector<ingest::GeoPoint> centroids;
    std::map<std::string, std::size_t> evse_to_hub;

    /// Member EVSE ids per hub, each list sorted.
    std::vector<std::vector<std::string>> members() const;
};

/// Lloyd's algorithm on (lat, lon) treated as a plane, from a seeded k-means++ start, until
/// the assignment stops changing or 100 iterations. A cluster that empties is reseeded at the
/// point farthest from its centroid. Throws ConfigError when k is 0 or exceeds the number of
/// distinct locations.
HubAssignment cluster_hubs(const std::vector<std::pair<std::string, ingest::GeoPoint>>& locations, std::size_t k,
                           std::uint64_t seed);

}  // namespace edf::federation
