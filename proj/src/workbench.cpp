#include "edf/workbench.hpp"

#include "edf/seasonal.hpp"
#include "edf/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace edf::workbench {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const TrainingError& e) {
        throw TrainingError(name + ": " + e.what());
    }
}

/// Reads optional keys of one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError("config: '" + where_ + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!v.is_number_unsigned()) throw ConfigError("");
            } else if constexpr (std::is_arithmetic_v<T>) {
                if (!v.is_number()) throw ConfigError("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError("config: '" + path(key) + "' has the wrong type");
        }
    }

    std::optional<Section> sub(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Section(j_.at(key), path(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError("config: unknown key '" + path(key) + "'");
        }
    }

private:
    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

forecast::RnnConfig rnn_config_for(const std::string& family, const ExperimentConfig& cfg) {
    forecast::RnnConfig rc = cfg.rnn;
    const auto shape = forecast::RnnConfig::for_family(family);
    rc.cell = shape.cell;
    rc.bidirectional = shape.bidirectional;
    return rc;
}

void record_fit(energy::EnergyLedger& ledger, const std::string& family, const forecast::FitInfo& info) {
    for (std::size_t e = 0; e < info.epoch_ops.size(); ++e) {
        const double seconds = e < info.epoch_seconds.size() ? info.epoch_seconds[e] : 0.0;
        ledger.record(family, energy::Phase::Centralized, "central", 0, e + 1, {info.epoch_ops[e], seconds});
    }
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

void prepare_run_directory(const fs::path& dir) {
    if (fs::exists(dir)) {
        if (!fs::exists(dir / "manifest.json")) {
            if (!fs::is_empty(dir)) throw ConfigError("refusing to overwrite " + dir.string() + ": not a run directory");
        } else {
            fs::remove_all(dir);
        }
    }
    fs::create_directories(dir);
}

nlohmann::ordered_json fit_json(const forecast::FitInfo& info) {
    nlohmann::ordered_json j;
    j["epochs_run"] = info.epochs_run;
    j["ops"] = info.ops;
    j["warning"] = info.warning;
    j["note"] = info.note;
    const auto last = [](const std::vector<double>& v) {
        return !v.empty() && std::isfinite(v.back()) ? nlohmann::ordered_json(v.back()) : nlohmann::ordered_json(nullptr);
    };
    j["final_train_loss"] = last(info.train_losses);
    j["final_validation_loss"] = last(info.validation_losses);
    return j;
}

nlohmann::ordered_json summary_row(const ModelRun& run, const energy::EnergyLedger& ledger, energy::Phase phase) {
    nlohmann::ordered_json j;
    j["model"] = run.family;
    nlohmann::ordered_json medians;
    for (const auto& q : run.report.summary) {
        medians[q.metric] = q.q50 ? nlohmann::ordered_json(*q.q50) : nlohmann::ordered_json(nullptr);
    }
    j["median"] = std::move(medians);
    j["energy_joules"] = ledger.total(run.family, phase);
    j["fit"] = fit_json(run.model->fit_info());
    return j;
}

void write_model_artifacts(const ModelRun& run, const features::NormalizationSpec& normalization, const fs::path& dir) {
    std::ostringstream model;
    forecast::save_model(model, *run.model, normalization);
    write_text(dir / "models" / (run.family + ".json"), model.str());
    write_text(dir / "metrics" / (run.family + ".json"), dump(run.report.to_json()));
    for (const auto& hub : run.per_hub) {
        write_text(dir / "metrics" / (run.family + "." + hub.group + ".json"), dump(hub.to_json()));
    }
    if (run.rounds) {
        std::ostringstream log;
        run.rounds->write_jsonl(log);
        write_text(dir / "rounds" / (run.family + ".jsonl"), log.str());
    }
}

void write_common(const PreparedData& data, const ExperimentConfig& cfg, const energy::EnergyLedger& ledger,
                  const fs::path& dir) {
    write_text(dir / "config.json", dump(cfg.to_json()));
    write_text(dir / "cleaning_report.json", ingest::cleaning_report_json(data.parsed, data.cleaned) + "\n");
    std::ostringstream csv;
    ledger.write_csv(csv);
    write_text(dir / "energy_ledger.csv", csv.str());
    nlohmann::ordered_json frames = nlohmann::ordered_json::array();
    for (const auto& f : data.frames) frames.push_back({{"evse_id", f.evse_id}, {"sha256", f.hash()}});
    write_text(dir / "frames.json", dump(frames));
}

}  // namespace

std::shared_ptr<const energy::Meter> MeterConfig::make() const {
    if (kind == "proxy") return std::make_shared<energy::OpCountMeter>(joules_per_op);
    if (kind == "wallclock") return std::make_shared<energy::WallClockMeter>(watts);
    throw ConfigError("unknown meter kind '" + kind + "' (expected proxy or wallclock)");
}

const std::vector<std::string>& known_families() {
    static const std::vector<std::string> families{"seasonal_naive", "arx", "gbt", "gru", "lstm", "bigru", "bilstm"};
    return families;
}

bool is_recurrent(const std::string& family) {
    return family == "gru" || family == "lstm" || family == "bigru" || family == "bilstm";
}

void ExperimentConfig::validate() const {
    if (data.kind != "synthetic" && data.kind != "file") throw ConfigError("data.kind must be synthetic or file");
    if (data.kind == "file" && data.path.empty()) throw ConfigError("data.path is required for file sources");
    if (data.kind == "synthetic" && (data.evse == 0 || data.days == 0)) {
        throw ConfigError("synthetic data needs at least one EVSE and one day");
    }
    if (data.kind == "synthetic") ingest::validate_profile(data.profile);
    if (!(sr_freq_hours > 0.0) || !std::isfinite(sr_freq_hours)) throw ConfigError("sr_freq_hours must be positive");
    if (!(split.train > 0.0 && split.valid >= 0.0 && split.train + split.valid < 1.0)) {
        throw ConfigError("split ratios must be positive and leave room for a test block");
    }
    if (hubs == 0) throw ConfigError("hubs must be at least 1");
    if (seasonal_lag == 0) throw ConfigError("seasonal_lag must be positive");
    if (models.empty()) throw ConfigError("models must list at least one family");
    std::set<std::string> seen;
    for (const auto& m : models) {
        if (std::find(known_families().begin(), known_families().end(), m) == known_families().end()) {
            throw ConfigError("unknown model family '" + m + "'");
        }
        if (!seen.insert(m).second) throw ConfigError("model family '" + m + "' listed twice");
    }
    seen.clear();
    for (const auto& m : federated_models) {
        if (m != "gbt" && !is_recurrent(m)) {
            throw ConfigError("family '" + m + "' cannot be federated (gbt, gru, lstm, bigru, bilstm)");
        }
        if (!seen.insert(m).second) throw ConfigError("model family '" + m + "' listed twice");
    }
    federation.validate();
    fedxgb.validate();
    gbt.validate();
    rnn.validate();
    if (arx.order == 0) throw ConfigError("arx.order must be at least 1");
    (void)meter.make();
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    const auto& pr = data.profile;
    j["data"] = {{"kind", data.kind},
                 {"path", data.path},
                 {"evse", data.evse},
                 {"days", data.days},
                 {"seed", data.seed},
                 {"profile",
                  {{"idle_probability", pr.idle_probability},
                   {"weekend_idle_probability", pr.weekend_idle_probability},
                   {"extra_sessions_mean", pr.extra_sessions_mean},
                   {"arrival_hour_std", pr.arrival_hour_std},
                   {"energy_median_kwh", pr.energy_median_kwh},
                   {"energy_power_exponent", pr.energy_power_exponent},
                   {"energy_log_sigma", pr.energy_log_sigma},
                   {"duration_median_hours", pr.duration_median_hours},
                   {"duration_log_sigma", pr.duration_log_sigma},
                   {"level_persistence", pr.level_persistence},
                   {"level_sigma", pr.level_sigma},
                   {"location_clusters", pr.n_location_clusters}}}};
    j["cleaning"] = {{"max_energy_kwh", cleaning.max_energy_kwh},
                     {"max_duration_hours", cleaning.max_duration_hours},
                     {"min_transactions_per_evse", cleaning.min_transactions_per_evse}};
    j["sr_freq_hours"] = sr_freq_hours;
    j["split"] = {{"train", split.train}, {"valid", split.valid}};
    j["rolling_window"] = rolling_window;
    j["models"] = models;
    j["federated_models"] = federated_models;
    j["hubs"] = hubs;
    j["federation"] = {{"rounds", federation.rounds},
                       {"local_epochs", federation.local_epochs},
                       {"local_patience", federation.local_patience},
                       {"global_patience", federation.global_patience},
                       {"strategy", federation::to_string(federation.strategy)},
                       {"mu", federation.mu}};
    j["fedxgb"] = {{"trees_per_client", fedxgb.trees_per_client},
                   {"rounds", fedxgb.rounds},
                   {"local_epochs", fedxgb.local_epochs},
                   {"patience", fedxgb.patience},
                   {"strategy", federation::to_string(fedxgb.strategy)},
                   {"mu", fedxgb.mu},
                   {"batch_size", fedxgb.batch_size},
                   {"learning_rate", fedxgb.adam.learning_rate}};
    j["gbt"] = {{"n_estimators", gbt.n_estimators},
                {"max_depth", gbt.max_depth},
                {"learning_rate", gbt.learning_rate},
                {"min_samples_leaf", gbt.min_samples_leaf},
                {"alpha", gbt.alpha}};
    j["rnn"] = {{"hidden", rnn.hidden},
                {"location_embedding", rnn.location_embedding},
                {"model_embedding", rnn.model_embedding},
                {"dropout", rnn.dropout},
                {"dense", rnn.dense},
                {"sequence_length", rnn.sequence_length},
                {"batch_size", rnn.batch_size},
                {"max_epochs", rnn.max_epochs},
                {"patience", rnn.patience},
                {"learning_rate", rnn.adam.learning_rate},
                {"alpha", rnn.alpha}};
    j["arx"] = {{"order", arx.order},
                {"seasonal_dummies", arx.seasonal_dummies},
                {"seasonal_period", arx.seasonal_period}};
    j["seasonal_lag"] = seasonal_lag;
    j["seed"] = seed;
    j["meter"] = {{"kind", meter.kind}, {"joules_per_op", meter.joules_per_op}, {"watts", meter.watts}};
    j["output_root"] = output_root;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    Section root(j, "");
    if (auto s = root.sub("data")) {
        s->read("kind", c.data.kind);
        s->read("path", c.data.path);
        s->read("evse", c.data.evse);
        s->read("days", c.data.days);
        s->read("seed", c.data.seed);
        if (auto p = s->sub("profile")) {
            auto& pr = c.data.profile;
            p->read("idle_probability", pr.idle_probability);
            p->read("weekend_idle_probability", pr.weekend_idle_probability);
            p->read("extra_sessions_mean", pr.extra_sessions_mean);
            p->read("arrival_hour_std", pr.arrival_hour_std);
            p->read("energy_median_kwh", pr.energy_median_kwh);
            p->read("energy_power_exponent", pr.energy_power_exponent);
            p->read("energy_log_sigma", pr.energy_log_sigma);
            p->read("duration_median_hours", pr.duration_median_hours);
            p->read("duration_log_sigma", pr.duration_log_sigma);
            p->read("level_persistence", pr.level_persistence);
            p->read("level_sigma", pr.level_sigma);
            p->read("location_clusters", pr.n_location_clusters);
            p->finish();
        }
        s->finish();
    }
    if (auto s = root.sub("cleaning")) {
        s->read("max_energy_kwh", c.cleaning.max_energy_kwh);
        s->read("max_duration_hours", c.cleaning.max_duration_hours);
        s->read("min_transactions_per_evse", c.cleaning.min_transactions_per_evse);
        s->finish();
    }
    root.read("sr_freq_hours", c.sr_freq_hours);
    if (auto s = root.sub("split")) {
        s->read("train", c.split.train);
        s->read("valid", c.split.valid);
        s->finish();
    }
    root.read("rolling_window", c.rolling_window);
    root.read("models", c.models);
    root.read("federated_models", c.federated_models);
    root.read("hubs", c.hubs);
    if (auto s = root.sub("federation")) {
        std::string strategy = federation::to_string(c.federation.strategy);
        s->read("rounds", c.federation.rounds);
        s->read("local_epochs", c.federation.local_epochs);
        s->read("local_patience", c.federation.local_patience);
        s->read("global_patience", c.federation.global_patience);
        s->read("strategy", strategy);
        s->read("mu", c.federation.mu);
        s->finish();
        c.federation.strategy = federation::parse_strategy(strategy);
    }
    if (auto s = root.sub("fedxgb")) {
        std::string strategy = federation::to_string(c.fedxgb.strategy);
        s->read("trees_per_client", c.fedxgb.trees_per_client);
        s->read("rounds", c.fedxgb.rounds);
        s->read("local_epochs", c.fedxgb.local_epochs);
        s->read("patience", c.fedxgb.patience);
        s->read("strategy", strategy);
        s->read("mu", c.fedxgb.mu);
        s->read("batch_size", c.fedxgb.batch_size);
        s->read("learning_rate", c.fedxgb.adam.learning_rate);
        s->finish();
        c.fedxgb.strategy = federation::parse_strategy(strategy);
    }
    if (auto s = root.sub("gbt")) {
        s->read("n_estimators", c.gbt.n_estimators);
        s->read("max_depth", c.gbt.max_depth);
        s->read("learning_rate", c.gbt.learning_rate);
        s->read("min_samples_leaf", c.gbt.min_samples_leaf);
        s->read("alpha", c.gbt.alpha);
        s->finish();
    }
    if (auto s = root.sub("rnn")) {
        s->read("hidden", c.rnn.hidden);
        s->read("location_embedding", c.rnn.location_embedding);
        s->read("model_embedding", c.rnn.model_embedding);
        s->read("dropout", c.rnn.dropout);
        s->read("dense", c.rnn.dense);
        s->read("sequence_length", c.rnn.sequence_length);
        s->read("batch_size", c.rnn.batch_size);
        s->read("max_epochs", c.rnn.max_epochs);
        s->read("patience", c.rnn.patience);
        s->read("learning_rate", c.rnn.adam.learning_rate);
        s->read("alpha", c.rnn.alpha);
        s->finish();
    }
    if (auto s = root.sub("arx")) {
        s->read("order", c.arx.order);
        s->read("seasonal_dummies", c.arx.seasonal_dummies);
        s->read("seasonal_period", c.arx.seasonal_period);
        s->finish();
    }
    root.read("seasonal_lag", c.seasonal_lag);
    root.read("seed", c.seed);
    if (auto s = root.sub("meter")) {
        s->read("kind", c.meter.kind);
        s->read("joules_per_op", c.meter.joules_per_op);
        s->read("watts", c.meter.watts);
        s->finish();
    }
    root.read("output_root", c.output_root);
    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

PreparedData prepare_data(const ExperimentConfig& cfg, const std::optional<features::NormalizationSpec>& normalization) {
    cfg.validate();
    PreparedData d;
    stage("ingest", [&] {
        if (cfg.data.kind == "synthetic") {
            d.parsed.transactions = ingest::generate_synthetic(cfg.data.evse, cfg.data.days, cfg.data.seed, cfg.data.profile);
        } else {
            std::ifstream in(cfg.data.path);
            if (!in) throw ConfigError("cannot open transaction file " + cfg.data.path);
            d.parsed = ingest::parse_transactions(in);
        }
        d.cleaned = ingest::clean_transactions(d.parsed.transactions, cfg.cleaning);
        if (d.cleaned.kept.empty()) throw DataError("no transactions left after cleaning");
        d.info = ingest::collect_evse_info(d.cleaned.kept);
        const auto freq = Seconds{std::llround(cfg.sr_freq_hours * kSecondsPerHour)};
        d.series = ingest::resample_demand(d.cleaned.kept, ingest::common_origin(d.cleaned.kept), freq);
        d.split = ingest::split_temporal(d.series.front().size(), cfg.split);
        return 0;
    });
    spdlog::info("ingest: {} transactions kept, {} EVSEs, {} bins", d.cleaned.kept.size(), d.series.size(),
                 d.split.length);
    stage("features", [&] {
        d.normalization = normalization ? *normalization : features::compute_normalization(d.series, d.info, d.split);
        for (const auto& s : d.series) {
            d.frames.push_back(features::build_feature_frame(s, d.normalization, d.split, {cfg.rolling_window},
                                                             &d.info.at(s.evse_id)));
        }
        return 0;
    });
    return d;
}

std::vector<metrics::EvseMetrics> evaluate_model(const forecast::ForecastModel& model,
                                                 std::span<const features::FeatureFrame> frames,
                                                 std::size_t seasonal_lag) {
    std::vector<metrics::EvseMetrics> out;
    for (const auto& f : frames) {
        const auto rows = f.rows_for(features::Role::Test);
        if (rows.empty()) continue;
        std::vector<double> y;
        y.reserve(rows.size());
        for (std::size_t k : rows) y.push_back(f.demand_kw[k + 1]);
        const auto yhat = model.predict(f, rows);
        const std::span<const double> train(f.demand_kw.data(), std::min(f.split.train_end, f.demand_kw.size()));
        out.push_back(metrics::evaluate(f.evse_id, y, yhat, train, seasonal_lag));
    }
    if (out.empty()) throw DataError("no EVSE has test rows");
    return out;
}

CentralizedResult run_centralized(const ExperimentConfig& cfg) {
    CentralizedResult result{prepare_data(cfg), {}, energy::EnergyLedger(cfg.meter.make())};
    const auto& frames = result.data.frames;
    for (const auto& family : cfg.models) {
        spdlog::info("train: fitting {}", family);
        ModelRun run;
        run.family = family;
        run.model = stage("fit " + family, [&]() -> std::unique_ptr<forecast::ForecastModel> {
            if (family == "seasonal_naive") return std::make_unique<forecast::SeasonalNaiveModel>(cfg.seasonal_lag);
            if (family == "arx") return std::make_unique<forecast::ArxModel>(forecast::fit_arx(frames, cfg.arx));
            if (family == "gbt") {
                const auto mask = features::gbt_feature_mask();
                const auto rows = forecast::make_tabular(frames, mask, features::Role::Train);
                return std::make_unique<forecast::GbtModel>(forecast::fit_gbt(rows, mask, cfg.gbt, cfg.seed));
            }
            return std::make_unique<forecast::RnnModel>(
                forecast::fit_rnn(frames, features::rnn_feature_mask(), rnn_config_for(family, cfg), cfg.seed));
        });
        record_fit(result.ledger, family, run.model->fit_info());
        run.report = stage("evaluate " + family, [&] {
            return metrics::quantile_report(family, "all", evaluate_model(*run.model, frames, cfg.seasonal_lag));
        });
        result.runs.push_back(std::move(run));
    }
    return result;
}

FederatedResult run_federated(const ExperimentConfig& cfg) {
    FederatedResult result{prepare_data(cfg), {}, {}, energy::EnergyLedger(cfg.meter.make()), energy::Phase::FedHeavy};
    result.phase = cfg.federation.local_epochs == 1 ? energy::Phase::FedLight : energy::Phase::FedHeavy;
    const auto& frames = result.data.frames;
    result.hubs = stage("cluster", [&] {
        std::vector<std::pair<std::string, ingest::GeoPoint>> locations;
        for (const auto& f : frames) locations.emplace_back(f.evse_id, result.data.info.at(f.evse_id).location);
        return federation::cluster_hubs(locations, cfg.hubs, cfg.seed);
    });
    std::vector<std::vector<features::FeatureFrame>> hub_frames(result.hubs.k);
    for (const auto& f : frames) hub_frames[result.hubs.evse_to_hub.at(f.evse_id)].push_back(f);
    spdlog::info("federate: {} hubs, phase {}", result.hubs.k, energy::to_string(result.phase));

    for (const auto& family : cfg.federated_models) {
        spdlog::info("federate: training {}", family);
        ModelRun run;
        run.family = family;
        const federation::LedgerTag tag{&result.ledger, family, result.phase};
        stage("federate " + family, [&] {
            if (family == "gbt") {
                const auto mask = features::gbt_feature_mask();
                std::vector<forecast::TabularData> train, valid;
                for (const auto& hf : hub_frames) {
                    train.push_back(forecast::make_tabular(hf, mask, features::Role::Train));
                    valid.push_back(forecast::make_tabular(hf, mask, features::Role::Validation));
                }
                federation::FedXgbPlan plan = cfg.fedxgb;
                plan.seed = cfg.seed;
                auto fit = federation::fit_fedxgb(train, valid, mask, cfg.gbt, plan, &tag);
                fit.model->mutable_fit_info().epochs_run = fit.log.rounds.size();
                run.model = std::move(fit.model);
                run.rounds = std::move(fit.log);
                return 0;
            }
            const auto rc = rnn_config_for(family, cfg);
            const auto mask = features::rnn_feature_mask();
            forecast::Vocabulary locations, models;
            forecast::extend_vocabularies(frames, locations, models);
            const forecast::RnnNetwork network(rc, mask.size(), locations.size(), models.size());
            std::vector<std::unique_ptr<forecast::RnnLearner>> learners;
            std::vector<forecast::LocalLearner*> clients;
            for (std::size_t h = 0; h < hub_frames.size(); ++h) {
                learners.push_back(std::make_unique<forecast::RnnLearner>(
                    network,
                    forecast::make_sequences(hub_frames[h], mask, features::Role::Train, rc.sequence_length, locations,
                                             models),
                    forecast::make_sequences(hub_frames[h], mask, features::Role::Validation, rc.sequence_length,
                                             locations, models),
                    cfg.seed + h));
                clients.push_back(learners.back().get());
            }
            federation::FederationPlan plan = cfg.federation;
            plan.seed = cfg.seed;
            auto fed = federation::run_federation(plan, clients, &tag);
            auto model = std::make_unique<forecast::RnnModel>(rc, mask, std::move(locations), std::move(models),
                                                              std::move(fed.global), cfg.seed);
            model->mutable_fit_info().epochs_run = fed.log.rounds.size();
            run.model = std::move(model);
            run.rounds = std::move(fed.log);
            return 0;
        });
        stage("evaluate " + family, [&] {
            auto per_evse = evaluate_model(*run.model, frames, cfg.seasonal_lag);
            for (std::size_t h = 0; h < result.hubs.k; ++h) {
                std::vector<metrics::EvseMetrics> members;
                for (const auto& e : per_evse) {
                    if (result.hubs.evse_to_hub.at(e.evse_id) == h) members.push_back(e);
                }
                if (!members.empty()) {
                    run.per_hub.push_back(metrics::quantile_report(family, "hub-" + std::to_string(h), members));
                }
            }
            run.report = metrics::quantile_report(family, "all", std::move(per_evse));
            return 0;
        });
        result.runs.push_back(std::move(run));
    }
    return result;
}

fs::path default_output_root(const ExperimentConfig& cfg) {
    if (!cfg.output_root.empty()) return cfg.output_root;
    if (const char* env = std::getenv("EDF_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
    return "out";
}

fs::path run_directory(const fs::path& root, const std::string& command, const ExperimentConfig& cfg) {
    auto j = cfg.to_json();
    j.erase("output_root");
    return root / ("run-" + sha256_hex(command + "\n" + j.dump()).substr(0, 16));
}

void write_centralized_artifacts(const CentralizedResult& result, const ExperimentConfig& cfg, const fs::path& dir) {
    prepare_run_directory(dir);
    write_common(result.data, cfg, result.ledger, dir);
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& run : result.runs) {
        write_model_artifacts(run, result.data.normalization, dir);
        summary.push_back(summary_row(run, result.ledger, energy::Phase::Centralized));
    }
    write_text(dir / "summary.json", dump(summary));
}

void write_federated_artifacts(const FederatedResult& result, const ExperimentConfig& cfg, const fs::path& dir) {
    prepare_run_directory(dir);
    write_common(result.data, cfg, result.ledger, dir);
    nlohmann::ordered_json hubs;
    hubs["k"] = result.hubs.k;
    auto list = nlohmann::ordered_json::array();
    const auto members = result.hubs.members();
    for (std::size_t h = 0; h < result.hubs.k; ++h) {
        list.push_back({{"hub", h},
                        {"lat", result.hubs.centroids[h].lat},
                        {"lon", result.hubs.centroids[h].lon},
                        {"members", members[h]}});
    }
    hubs["hubs"] = std::move(list);
    write_text(dir / "hubs.json", dump(hubs));
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& run : result.runs) {
        write_model_artifacts(run, result.data.normalization, dir);
        auto row = summary_row(run, result.ledger, result.phase);
        row["phase"] = energy::to_string(result.phase);
        summary.push_back(std::move(row));
    }
    write_text(dir / "summary.json", dump(summary));
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return sha256_hex(buffer.str());
}

nlohmann::ordered_json write_manifest(const fs::path& dir, const std::string& command,
                                      const nlohmann::ordered_json& overrides) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir);
        if (rel == "manifest.json") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.generic_string() < b.generic_string();
    });
    nlohmann::ordered_json m;
    m["format"] = "edf-manifest/1";
    m["command"] = command;
    m["overrides"] = overrides;
    auto list = nlohmann::ordered_json::array();
    for (const auto& rel : files) {
        list.push_back({{"path", rel.generic_string()},
                        {"bytes", fs::file_size(dir / rel)},
                        {"sha256", sha256_file(dir / rel)}});
    }
    m["files"] = std::move(list);
    write_text(dir / "manifest.json", dump(m));
    return m;
}

}  // namespace edf::workbench
