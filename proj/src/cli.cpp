#include "edf/cli.hpp"

#include "edf/util.hpp"
#include "edf/workbench.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace edf::cli {

namespace fs = std::filesystem;

namespace {

void setup_logging(int verbosity) {
    static const auto logger = [] {
        auto l = spdlog::stderr_logger_mt("edf");
        l->set_pattern("[%l] %v");
        return l;
    }();
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbosity > 0 ? spdlog::level::debug
                      : verbosity < 0 ? spdlog::level::warn
                                      : spdlog::level::info);
}

/// Flags shared by the experiment subcommands. Unset optionals leave the config untouched.
struct ExperimentFlags {
    std::string config;
    std::string data;
    std::optional<std::size_t> evse, days, hubs, rounds, epochs, patience;
    std::optional<std::uint64_t> data_seed, seed;
    std::optional<std::string> out, strategy, meter;
    std::optional<double> mu;
    std::vector<std::string> models;

    void add_common(CLI::App* app) {
        app->add_option("-c,--config", config, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
        app->add_option("--data", data, "Transaction file; replaces the synthetic source")->check(CLI::ExistingFile);
        app->add_option("--evse", evse, "Synthetic EVSE count");
        app->add_option("--days", days, "Synthetic days");
        app->add_option("--data-seed", data_seed, "Synthetic generator seed");
        app->add_option("--seed", seed, "Training seed");
        app->add_option("--out", out, "Output root (default: config, then $EDF_OUTPUT_ROOT, then ./out)");
        app->add_option("--meter", meter, "Energy meter: proxy or wallclock")->check(CLI::IsMember({"proxy", "wallclock"}));
    }

    void add_federation(CLI::App* app) {
        app->add_option("--strategy", strategy, "fedavg or fedprox")->check(CLI::IsMember({"fedavg", "fedprox"}));
        app->add_option("--mu", mu, "FedProx proximal weight");
        app->add_option("--rounds", rounds, "Communication rounds");
        app->add_option("--epochs", epochs, "Local epochs per round");
        app->add_option("--patience", patience, "Local early-stopping patience (0 disables)");
        app->add_option("--hubs", hubs, "Number of EVSE hubs (clients)");
    }

    /// Applies flags over the config file; returns the overrides that were given.
    nlohmann::ordered_json apply(workbench::ExperimentConfig& cfg, bool federated) const {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        if (!data.empty()) {
            cfg.data.kind = "file";
            cfg.data.path = data;
            o["data"] = data;
        }
        if (evse) o["evse"] = cfg.data.evse = *evse;
        if (days) o["days"] = cfg.data.days = *days;
        if (data_seed) o["data_seed"] = cfg.data.seed = *data_seed;
        if (seed) o["seed"] = cfg.seed = *seed;
        if (meter) o["meter"] = cfg.meter.kind = *meter;
        if (!models.empty()) {
            (federated ? cfg.federated_models : cfg.models) = models;
            o["model"] = models;
        }
        if (strategy) {
            cfg.federation.strategy = federation::parse_strategy(*strategy);
            o["strategy"] = *strategy;
        }
        if (mu) o["mu"] = cfg.federation.mu = *mu;
        if (rounds) o["rounds"] = cfg.federation.rounds = *rounds;
        if (epochs) o["epochs"] = cfg.federation.local_epochs = *epochs;
        if (patience) o["patience"] = cfg.federation.local_patience = *patience;
        if (hubs) o["hubs"] = cfg.hubs = *hubs;
        if (out) o["out"] = cfg.output_root = *out;
        cfg.validate();
        return o;
    }

    workbench::ExperimentConfig load() const {
        return config.empty() ? workbench::ExperimentConfig{} : workbench::load_config(config);
    }
};

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

fs::path finish(const fs::path& dir, const std::string& command, const nlohmann::ordered_json& overrides) {
    workbench::write_manifest(dir, command, overrides);
    spdlog::info("{}: artifacts in {}", command, dir.string());
    std::cout << dir.string() << '\n';
    return dir;
}

void cmd_synth(std::size_t evse, std::size_t days, std::uint64_t seed, const std::optional<std::string>& out) {
    const auto txs = ingest::generate_synthetic(evse, days, seed);
    workbench::ExperimentConfig defaults;
    const fs::path dir = out ? fs::path(*out)
                             : workbench::default_output_root(defaults) /
                                   ("synth-" + std::to_string(evse) + "x" + std::to_string(days) + "-" +
                                    std::to_string(seed));
    std::ostringstream csv;
    ingest::write_transactions(csv, txs);
    write_file(dir / "transactions.csv", csv.str());
    spdlog::info("synth: {} transactions for {} EVSEs over {} days", txs.size(), evse, days);
    finish(dir, "synth", {{"evse", evse}, {"days", days}, {"seed", seed}});
}

void cmd_ingest(const std::string& input, const std::optional<std::string>& out, const ingest::CleaningRules& rules,
                double sr_freq_hours, const nlohmann::ordered_json& overrides) {
    workbench::ExperimentConfig cfg;
    cfg.data.kind = "file";
    cfg.data.path = input;
    cfg.cleaning = rules;
    cfg.sr_freq_hours = sr_freq_hours;
    const auto data = workbench::prepare_data(cfg);
    const fs::path dir = out ? fs::path(*out) : workbench::run_directory(workbench::default_output_root(cfg), "ingest", cfg);
    std::ostringstream cleaned;
    ingest::write_transactions(cleaned, data.cleaned.kept);
    write_file(dir / "cleaned_transactions.csv", cleaned.str());
    write_file(dir / "cleaning_report.json", ingest::cleaning_report_json(data.parsed, data.cleaned) + "\n");
    for (std::size_t i = 0; i < data.series.size(); ++i) {
        std::ostringstream series, frame;
        ingest::write_demand_series(series, data.series[i]);
        write_file(dir / "demand" / (data.series[i].evse_id + ".csv"), series.str());
        features::write_feature_frame(frame, data.frames[i]);
        write_file(dir / "features" / (data.frames[i].evse_id + ".csv"), frame.str());
    }
    finish(dir, "ingest", overrides);
}

void cmd_train(const ExperimentFlags& flags) {
    auto cfg = flags.load();
    const auto overrides = flags.apply(cfg, false);
    const auto result = workbench::run_centralized(cfg);
    const auto dir = workbench::run_directory(workbench::default_output_root(cfg), "train", cfg);
    workbench::write_centralized_artifacts(result, cfg, dir);
    finish(dir, "train", overrides);
}

void cmd_federate(const ExperimentFlags& flags) {
    auto cfg = flags.load();
    const auto overrides = flags.apply(cfg, true);
    const auto result = workbench::run_federated(cfg);
    const auto dir = workbench::run_directory(workbench::default_output_root(cfg), "federate", cfg);
    workbench::write_federated_artifacts(result, cfg, dir);
    finish(dir, "federate", overrides);
}

void cmd_evaluate(const ExperimentFlags& flags, const std::string& model_path) {
    auto cfg = flags.load();
    auto overrides = flags.apply(cfg, false);
    std::ifstream in(model_path);
    if (!in) throw ConfigError("cannot open model file " + model_path);
    const auto loaded = forecast::load_model(in);
    const auto data = workbench::prepare_data(cfg, loaded.normalization);
    const auto family = loaded.model->family();
    const auto report = metrics::quantile_report(
        family, "all", workbench::evaluate_model(*loaded.model, data.frames, cfg.seasonal_lag));
    const auto model_hash = workbench::sha256_file(model_path);
    overrides["model_file_sha256"] = model_hash;
    const auto dir = workbench::run_directory(workbench::default_output_root(cfg), "evaluate:" + model_hash, cfg);
    if (fs::exists(dir / "manifest.json")) fs::remove_all(dir);
    write_file(dir / "config.json", cfg.to_json().dump(2) + "\n");
    write_file(dir / "metrics" / (family + ".json"), report.to_json().dump(2) + "\n");
    finish(dir, "evaluate", overrides);
}

energy::EnergyLedger read_ledger(const fs::path& run_dir) {
    std::ifstream in(run_dir / "energy_ledger.csv");
    if (!in) throw ConfigError("no energy_ledger.csv in " + run_dir.string());
    return energy::EnergyLedger::read_csv(in);
}

void cmd_report(const std::string& centralized, const std::string& heavy, const std::string& light,
                const std::optional<std::string>& out) {
    const auto cent = read_ledger(centralized);
    const auto h = read_ledger(heavy);
    const auto l = read_ledger(light);
    const auto comparison = energy::phase_comparison(cent, h, l);
    std::ostringstream key;
    for (const auto* d : {&centralized, &heavy, &light}) key << workbench::sha256_file(fs::path(*d) / "energy_ledger.csv");
    workbench::ExperimentConfig defaults;
    const fs::path dir =
        out ? fs::path(*out) : workbench::default_output_root(defaults) / ("report-" + sha256_hex(key.str()).substr(0, 16));
    write_file(dir / "energy_comparison.json", comparison.dump(2) + "\n");
    finish(dir, "report", {{"centralized", centralized}, {"heavy", heavy}, {"light", light}});
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"EV charging demand forecasting and federated-learning workbench", "edf"};
    app.require_subcommand(1);
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "More progress output on stderr");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only warnings and errors on stderr");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic transaction file");
    std::size_t synth_evse = 8, synth_days = 120;
    std::uint64_t synth_seed = 7;
    std::optional<std::string> synth_out;
    synth->add_option("--evse", synth_evse, "EVSE count")->capture_default_str();
    synth->add_option("--days", synth_days, "Days of history")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory");

    auto* ingest_cmd = app.add_subcommand("ingest", "Clean transactions, resample demand and build feature frames");
    std::string ingest_input;
    std::optional<std::string> ingest_out;
    ingest::CleaningRules rules;
    double sr_freq_hours = 12.0;
    ingest_cmd->add_option("--input", ingest_input, "Transaction file")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--out", ingest_out, "Output directory");
    ingest_cmd->add_option("--max-energy", rules.max_energy_kwh, "Drop sessions above this energy (kWh)")
        ->capture_default_str();
    ingest_cmd->add_option("--max-duration", rules.max_duration_hours, "Drop sessions longer than this (h)")
        ->capture_default_str();
    ingest_cmd->add_option("--min-transactions", rules.min_transactions_per_evse, "Drop EVSEs with fewer sessions")
        ->capture_default_str();
    ingest_cmd->add_option("--sr-freq-hours", sr_freq_hours, "Bin width in hours")->capture_default_str();

    auto* train = app.add_subcommand("train", "Centralized training and test-set evaluation");
    ExperimentFlags train_flags;
    train_flags.add_common(train);
    train->add_option("--model", train_flags.models, "Model family (repeatable): seasonal_naive, arx, gbt, gru, lstm, bigru, bilstm");

    auto* federate = app.add_subcommand("federate", "Federated training over EVSE hubs");
    ExperimentFlags fed_flags;
    fed_flags.add_common(federate);
    fed_flags.add_federation(federate);
    federate->add_option("--model", fed_flags.models, "Model family (repeatable): gbt, gru, lstm, bigru, bilstm");

    auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the test block");
    ExperimentFlags eval_flags;
    eval_flags.add_common(evaluate);
    std::string model_path;
    evaluate->add_option("--model-file", model_path, "Saved model")->required()->check(CLI::ExistingFile);

    auto* report = app.add_subcommand("report", "Compare energy ledgers of centralized, heavy and light runs");
    std::string rep_cent, rep_heavy, rep_light;
    std::optional<std::string> rep_out;
    report->add_option("--centralized", rep_cent, "Run directory of `train`")->required()->check(CLI::ExistingDirectory);
    report->add_option("--heavy", rep_heavy, "Run directory of a heavy `federate`")->required()->check(CLI::ExistingDirectory);
    report->add_option("--light", rep_light, "Run directory of a light `federate`")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", rep_out, "Output directory");

    try {
        std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    setup_logging(quiet ? -1 : verbosity);
    try {
        if (*synth) {
            if (synth_evse == 0 || synth_days == 0) throw ConfigError("--evse and --days must be positive");
            cmd_synth(synth_evse, synth_days, synth_seed, synth_out);
        } else if (*ingest_cmd) {
            nlohmann::ordered_json o{{"input", ingest_input},
                                     {"max_energy", rules.max_energy_kwh},
                                     {"max_duration", rules.max_duration_hours},
                                     {"min_transactions", rules.min_transactions_per_evse},
                                     {"sr_freq_hours", sr_freq_hours}};
            cmd_ingest(ingest_input, ingest_out, rules, sr_freq_hours, o);
        } else if (*train) {
            cmd_train(train_flags);
        } else if (*federate) {
            cmd_federate(fed_flags);
        } else if (*evaluate) {
            cmd_evaluate(eval_flags, model_path);
        } else if (*report) {
            cmd_report(rep_cent, rep_heavy, rep_light, rep_out);
        }
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitInvalid;
    } catch (const DataError& e) {
        spdlog::error("{}", e.what());
        return kExitInvalid;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace edf::cli
