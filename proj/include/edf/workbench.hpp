#pragma once

#include "edf/arx.hpp"
#include "edf/energy.hpp"
#include "edf/fedxgb.hpp"
#include "edf/features.hpp"
#include "edf/gbt.hpp"
#include "edf/ingest.hpp"
#include "edf/kmeans.hpp"
#include "edf/metrics.hpp"
#include "edf/rnn.hpp"
#include "edf/synthetic.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace edf::workbench {

struct DataSource {
    std::string kind = "synthetic";  // "synthetic" or "file"
    std::string path;                // transaction file when kind = "file"
    std::size_t evse = 8;
    std::size_t days = 120;
    std::uint64_t seed = 7;
    ingest::SyntheticProfile profile;
};

struct MeterConfig {
    std::string kind = "proxy";  // "proxy" or "wallclock"
    double joules_per_op = 1e-9;
    double watts = 30.0;

    std::shared_ptr<const energy::Meter> make() const;
};

/// Every knob of an experiment. JSON keys mirror the field names; absent keys keep defaults
/// and unknown keys are rejected.
struct ExperimentConfig {
    DataSource data;
    ingest::CleaningRules cleaning;
    double sr_freq_hours = 12.0;
    ingest::SplitRatios split;
    std::size_t rolling_window = 5;
    std::vector<std::string> models{"seasonal_naive", "arx", "gbt"};
    std::vector<std::string> federated_models{"gbt", "gru"};
    std::size_t hubs = 4;
    federation::FederationPlan federation;
    federation::FedXgbPlan fedxgb;
    forecast::GbtConfig gbt;
    forecast::RnnConfig rnn;  // cell and direction come from each family name
    forecast::ArxConfig arx;
    std::size_t seasonal_lag = 24;
    std::uint64_t seed = 7;
    MeterConfig meter;
    std::string output_root;  // empty → EDF_OUTPUT_ROOT, then "out"

    /// Throws ConfigError on unknown families, k = 0 and out-of-range values.
    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Every family name accepted in a roster.
const std::vector<std::string>& known_families();
bool is_recurrent(const std::string& family);

struct PreparedData {
    ingest::ParseResult parsed;
    ingest::CleaningResult cleaned;
    std::map<std::string, ingest::EvseInfo> info;
    std::vector<ingest::DemandSeries> series;
    ingest::TemporalSplit split;
    features::NormalizationSpec normalization;
    std::vector<features::FeatureFrame> frames;  // ordered by evse_id
};

/// Load or synthesize, clean, resample, split, normalize and build frames. A given
/// normalization (from a saved model) replaces the one computed from the training block.
PreparedData prepare_data(const ExperimentConfig& cfg,
                          const std::optional<features::NormalizationSpec>& normalization = std::nullopt);

/// Test-block forecasts against the observed kW, one entry per frame.
std::vector<metrics::EvseMetrics> evaluate_model(const forecast::ForecastModel& model,
                                                 std::span<const features::FeatureFrame> frames,
                                                 std::size_t seasonal_lag);

struct ModelRun {
    std::string family;
    std::unique_ptr<forecast::ForecastModel> model;
    metrics::MetricsReport report;
    std::vector<metrics::MetricsReport> per_hub;
    std::optional<federation::RoundLog> rounds;
};

struct CentralizedResult {
    PreparedData data;
    std::vector<ModelRun> runs;
    energy::EnergyLedger ledger;
};

CentralizedResult run_centralized(const ExperimentConfig& cfg);

struct FederatedResult {
    PreparedData data;
    federation::HubAssignment hubs;
    std::vector<ModelRun> runs;
    energy::EnergyLedger ledger;
    energy::Phase phase = energy::Phase::FedHeavy;
};

/// Recurrent families train with FedAvg/FedProx, "gbt" with FedXGBllr. The ledger phase is
/// fed-light for one local epoch per round and fed-heavy otherwise.
FederatedResult run_federated(const ExperimentConfig& cfg);

/// out_root/run-<hash>, where the hash covers the command and the resolved configuration.
std::filesystem::path run_directory(const std::filesystem::path& root, const std::string& command,
                                    const ExperimentConfig& cfg);
std::filesystem::path default_output_root(const ExperimentConfig& cfg);

void write_centralized_artifacts(const CentralizedResult& result, const ExperimentConfig& cfg,
                                 const std::filesystem::path& dir);
void write_federated_artifacts(const FederatedResult& result, const ExperimentConfig& cfg,
                               const std::filesystem::path& dir);

/// Writes dir/manifest.json listing every other file under `dir` with its SHA-256, sorted by
/// path, plus the command and flag overrides. Returns the document.
nlohmann::ordered_json write_manifest(const std::filesystem::path& dir, const std::string& command,
                                      const nlohmann::ordered_json& overrides);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace edf::workbench
