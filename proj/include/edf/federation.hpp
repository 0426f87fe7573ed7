#pragma once

#include "edf/energy.hpp"
#include "edf/training.hpp"

#include "json.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace edf::federation {

enum class Strategy { FedAvg, FedProx };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

struct FederationPlan {
    std::size_t rounds = 50;
    std::size_t local_epochs = 5;
    std::size_t local_patience = 2;   // 0 disables per-round early stopping
    std::size_t global_patience = 0;  // rounds without global validation gain; 0 disables
    Strategy strategy = Strategy::FedProx;
    double mu = 0.1;
    std::uint64_t seed = 0;

    /// Throws ConfigError unless local_epochs ≥ 1 and μ ≥ 0. Zero rounds is allowed and
    /// returns the initial model.
    void validate() const;
    /// Proximal weight actually applied: μ under FedProx, 0 under FedAvg.
    double effective_mu() const { return strategy == Strategy::FedProx ? mu : 0.0; }
};

struct ClientUpdate {
    std::span<const double> params;
    double weight = 0.0;  // local training sample count
};

/// Sample-weighted mean, accumulated as a running mean in the given order and clamped to the
/// coordinate-wise client range. Throws DataError on mismatched lengths, no clients or a
/// non-positive total weight.
std::vector<double> fedavg_aggregate(std::span<const ClientUpdate> clients);

/// E local epochs on pinball loss + (μ/2)‖w − w_global‖², starting from the global vector.
std::vector<double> fedprox_local_train(forecast::LocalLearner& learner, std::span<const double> global,
                                        std::size_t epochs, double mu, std::size_t patience = 0,
                                        forecast::LocalTrainReport* report = nullptr);

struct ClientRoundRecord {
    std::size_t hub = 0;
    std::size_t samples = 0;
    std::size_t epochs = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;  // NaN without validation data
    double update_norm = 0.0;      // ‖w_local − w_global‖₂
    double joules = 0.0;
    std::uint64_t ops = 0;
};

struct RoundRecord {
    std::size_t round = 0;  // 1-based
    std::vector<ClientRoundRecord> clients;
    double global_validation_loss = 0.0;  // NaN when no client has validation data
    std::string snapshot_hash;            // SHA-256 of the aggregated parameters
};

struct RoundLog {
    std::size_t initial_participant = 0;
    std::string initial_hash;
    std::vector<RoundRecord> rounds;
    std::string stop_reason;  // empty when every planned round ran

    /// One JSON object per line: a header record, then one record per round.
    void write_jsonl(std::ostream& out) const;
};

/// Where a federation run books its energy.
struct LedgerTag {
    energy::EnergyLedger* ledger = nullptr;
    std::string model;
    energy::Phase phase = energy::Phase::FedHeavy;
};

struct FederationResult {
    std::vector<double> global;
    RoundLog log;
};

/// Clients are indexed by hub id and processed in that order. Every client initializes a local
/// model; the one of a participant chosen with the plan's seed becomes the initial global model. Each client keeps
/// its optimizer and shuffling state across rounds. A failing client aborts the run with a
/// TrainingError naming the round and hub; nothing from that round is aggregated.
FederationResult run_federation(const FederationPlan& plan, std::span<forecast::LocalLearner* const> clients,
                                const LedgerTag* tag = nullptr);

}  // namespace edf::federation
