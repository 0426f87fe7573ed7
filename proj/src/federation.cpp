#include "edf/federation.hpp"

#include "edf/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace edf::federation {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::string hub_label(std::size_t hub) { return "hub-" + std::to_string(hub); }

double global_validation(std::span<forecast::LocalLearner* const> clients, std::span<const double> params) {
    double sum = 0.0, weight = 0.0;
    for (auto* c : clients) {
        if (!c->has_validation()) continue;
        const auto w = static_cast<double>(c->sample_count());
        sum += w * c->validation_loss(params);
        weight += w;
    }
    return weight > 0.0 ? sum / weight : kNaN;
}

}  // namespace

std::string to_string(Strategy s) { return s == Strategy::FedAvg ? "fedavg" : "fedprox"; }

Strategy parse_strategy(const std::string& text) {
    if (text == "fedavg") return Strategy::FedAvg;
    if (text == "fedprox") return Strategy::FedProx;
    throw ConfigError("unknown strategy '" + text + "' (expected fedavg or fedprox)");
}

void FederationPlan::validate() const {
    if (local_epochs == 0) throw ConfigError("local epochs must be at least 1");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("proximal weight must be non-negative");
}

std::vector<double> fedavg_aggregate(std::span<const ClientUpdate> clients) {
    if (clients.empty()) throw DataError("aggregation needs at least one client");
    const std::size_t n = clients.front().params.size();
    for (const auto& c : clients) {
        if (c.params.size() != n) throw DataError("client parameter layouts differ");
        if (!(c.weight >= 0.0)) throw DataError("client weights must be non-negative");
    }
    std::vector<double> mean(n, 0.0), lo(n, std::numeric_limits<double>::infinity()),
        hi(n, -std::numeric_limits<double>::infinity());
    double cumulative = 0.0;
    for (const auto& c : clients) {
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = std::min(lo[i], c.params[i]);
            hi[i] = std::max(hi[i], c.params[i]);
        }
        if (c.weight == 0.0) continue;
        cumulative += c.weight;
        const double share = c.weight / cumulative;
        for (std::size_t i = 0; i < n; ++i) mean[i] += share * (c.params[i] - mean[i]);
    }
    if (!(cumulative > 0.0)) throw DataError("total client weight must be positive");
    for (std::size_t i = 0; i < n; ++i) mean[i] = std::clamp(mean[i], lo[i], hi[i]);
    return mean;
}

std::vector<double> fedprox_local_train(forecast::LocalLearner& learner, std::span<const double> global,
                                        std::size_t epochs, double mu, std::size_t patience,
                                        forecast::LocalTrainReport* report) {
    if (!(mu >= 0.0)) throw ConfigError("proximal weight must be non-negative");
    std::vector<double> params(global.begin(), global.end());
    const forecast::ProxTerm prox{global, mu};
    auto r = forecast::train_local(learner, params, {epochs, patience}, mu > 0.0 ? &prox : nullptr);
    if (report != nullptr) *report = std::move(r);
    return params;
}

void RoundLog::write_jsonl(std::ostream& out) const {
    nlohmann::ordered_json head;
    head["record"] = "start";
    head["initial_participant"] = initial_participant;
    head["initial_hash"] = initial_hash;
    head["rounds"] = rounds.size();
    head["stop_reason"] = stop_reason;
    out << head.dump() << '\n';
    for (const auto& r : rounds) {
        nlohmann::ordered_json j;
        j["record"] = "round";
        j["round"] = r.round;
        j["global_validation_loss"] = number_or_null(r.global_validation_loss);
        j["snapshot_hash"] = r.snapshot_hash;
        auto clients = nlohmann::ordered_json::array();
        for (const auto& c : r.clients) {
            clients.push_back({{"hub", c.hub},
                               {"samples", c.samples},
                               {"epochs", c.epochs},
                               {"train_loss", number_or_null(c.train_loss)},
                               {"validation_loss", number_or_null(c.validation_loss)},
                               {"update_norm", c.update_norm},
                               {"joules", c.joules},
                               {"ops", c.ops}});
        }
        j["clients"] = std::move(clients);
        out << j.dump() << '\n';
    }
}

FederationResult run_federation(const FederationPlan& plan, std::span<forecast::LocalLearner* const> clients,
                                const LedgerTag* tag) {
    plan.validate();
    if (clients.empty()) throw DataError("federation needs at least one hub");
    const std::size_t n_params = clients.front()->parameter_count();
    for (auto* c : clients) {
        if (c->parameter_count() != n_params) throw DataError("hubs disagree on the model layout");
        if (c->sample_count() == 0) throw DataError("every hub needs training data");
    }

    FederationResult result;
    std::mt19937_64 rng(plan.seed);
    const std::size_t first = std::uniform_int_distribution<std::size_t>(0, clients.size() - 1)(rng);
    // Every client draws its own local model so their random streams advance alike.
    for (std::size_t hub = 0; hub < clients.size(); ++hub) {
        auto local = clients[hub]->initial_parameters();
        if (hub == first) result.global = std::move(local);
    }
    result.log.initial_participant = first;
    result.log.initial_hash = sha256_hex(std::span<const double>(result.global));

    const double mu = plan.effective_mu();
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_global;
    std::size_t since_best = 0;
    for (std::size_t round = 1; round <= plan.rounds; ++round) {
        RoundRecord record;
        record.round = round;
        std::vector<std::vector<double>> locals;
        locals.reserve(clients.size());
        for (std::size_t hub = 0; hub < clients.size(); ++hub) {
            forecast::LocalTrainReport report;
            try {
                locals.push_back(
                    fedprox_local_train(*clients[hub], result.global, plan.local_epochs, mu, plan.local_patience, &report));
            } catch (const std::exception& e) {
                throw TrainingError("round " + std::to_string(round) + ", " + hub_label(hub) + ": " + e.what());
            }
            ClientRoundRecord c;
            c.hub = hub;
            c.samples = clients[hub]->sample_count();
            c.epochs = report.epochs.size();
            c.train_loss = report.epochs.empty() ? kNaN : report.epochs.back().train_loss;
            c.validation_loss = clients[hub]->has_validation() ? clients[hub]->validation_loss(locals.back()) : kNaN;
            double ss = 0.0;
            for (std::size_t i = 0; i < n_params; ++i) {
                const double d = locals.back()[i] - result.global[i];
                ss += d * d;
            }
            c.update_norm = std::sqrt(ss);
            c.ops = report.ops();
            if (tag != nullptr && tag->ledger != nullptr) {
                for (std::size_t e = 0; e < report.epochs.size(); ++e) {
                    c.joules += tag->ledger
                                    ->record(tag->model, tag->phase, hub_label(hub), round, e + 1,
                                             {report.epochs[e].ops, report.epochs[e].seconds})
                                    .joules;
                }
            }
            record.clients.push_back(c);
        }
        std::vector<ClientUpdate> updates;
        for (std::size_t hub = 0; hub < clients.size(); ++hub) {
            updates.push_back({locals[hub], static_cast<double>(clients[hub]->sample_count())});
        }
        result.global = fedavg_aggregate(updates);
        if (tag != nullptr && tag->ledger != nullptr) {
            tag->ledger->record(tag->model, tag->phase, "server", round, 0,
                                {static_cast<std::uint64_t>(3 * clients.size() * n_params), 0.0});
        }
        record.global_validation_loss = global_validation(clients, result.global);
        record.snapshot_hash = sha256_hex(std::span<const double>(result.global));
        result.log.rounds.push_back(std::move(record));

        if (plan.global_patience > 0 && std::isfinite(result.log.rounds.back().global_validation_loss)) {
            const double v = result.log.rounds.back().global_validation_loss;
            if (v < best) {
                best = v;
                best_global = result.global;
                since_best = 0;
            } else if (++since_best >= plan.global_patience) {
                result.log.stop_reason = "global validation loss did not improve for " +
                                         std::to_string(plan.global_patience) + " rounds";
                break;
            }
        }
    }
    if (!best_global.empty()) result.global = std::move(best_global);
    return result;
}

}  // namespace edf::federation
