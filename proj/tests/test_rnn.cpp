#include "edf/rnn.hpp"
#include "edf/workbench.hpp"

#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

using namespace edf;
using namespace edf::forecast;

namespace {

RnnConfig small_config(const std::string& family) {
    auto c = RnnConfig::for_family(family);
    c.hidden = 4;
    c.dense = 5;
    c.location_embedding = 3;
    c.model_embedding = 2;
    c.sequence_length = 6;
    c.batch_size = 4;
    return c;
}

std::vector<SequenceSample> random_samples(std::size_t n, std::size_t input_dim, std::size_t steps,
                                           std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<SequenceSample> out(n);
    for (auto& s : out) {
        for (std::size_t i = 0; i < steps * input_dim; ++i) s.inputs.push_back(u(rng));
        s.location = rng() % 4;
        s.model = rng() % 3;
        s.nominal = 0.5 + 0.5 * u(rng);
        s.target = u(rng);
    }
    return out;
}

double batch_loss(const RnnNetwork& net, const std::vector<double>& p, const std::vector<const SequenceSample*>& b) {
    std::vector<double> scratch(p.size(), 0.0);
    return net.loss_and_gradient(p, b, scratch, nullptr);
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

workbench::PreparedData small_dataset() {
    workbench::ExperimentConfig cfg;
    cfg.data.evse = 2;
    cfg.data.days = 120;
    return workbench::prepare_data(cfg);
}

}  // namespace

TEST_CASE("analytic gradients match central differences for every cell") {
    for (const std::string family : {"gru", "lstm", "bigru", "bilstm"}) {
        CAPTURE(family);
        const auto cfg = small_config(family);
        const RnnNetwork net(cfg, 3, 4, 3);
        std::mt19937_64 rng(5);
        const auto params = net.initialize(rng);
        auto samples = random_samples(3, 3, cfg.sequence_length, rng);
        // Keep every residual away from the pinball kink.
        for (std::size_t i = 0; i < samples.size(); ++i)
            samples[i].target = net.predict(params, samples[i]) + (i % 2 ? 0.5 : -0.5);
        std::vector<const SequenceSample*> batch;
        for (const auto& s : samples) batch.push_back(&s);

        std::vector<double> grad(params.size(), 0.0);
        net.loss_and_gradient(params, batch, grad, nullptr);
        std::vector<double> fd(params.size()), diff(params.size());
        const double h = 1e-6;
        for (std::size_t j = 0; j < params.size(); ++j) {
            auto up = params, down = params;
            up[j] += h;
            down[j] -= h;
            fd[j] = (batch_loss(net, up, batch) - batch_loss(net, down, batch)) / (2 * h);
            diff[j] = fd[j] - grad[j];
        }
        CHECK(norm(grad) > 0.0);
        CHECK(norm(diff) / std::max(norm(fd), norm(grad)) <= 1e-4);
    }
}

TEST_CASE("parameter layout is contiguous and bidirectional doubles the recurrent part") {
    for (const std::string cell : {"gru", "lstm"}) {
        const RnnNetwork uni(small_config(cell), 3, 4, 3);
        const RnnNetwork bi(small_config("bi" + cell), 3, 4, 3);
        CHECK(bi.recurrent_parameter_count() == 2 * uni.recurrent_parameter_count());
        for (const RnnNetwork* net : {&uni, &bi}) {
            std::size_t offset = 0;
            for (const auto& block : net->layout()) {
                CHECK(block.offset == offset);
                offset += block.size;
            }
            CHECK(offset == net->parameter_count());
        }
    }
    // H = 4, D = 3, three gates plus the hidden-side bias
    const RnnNetwork gru(small_config("gru"), 3, 4, 3);
    CHECK(gru.recurrent_parameter_count() == 12 * 3 + 12 * 4 + 12 + 12);
    const RnnNetwork lstm(small_config("lstm"), 3, 4, 3);
    CHECK(lstm.recurrent_parameter_count() == 16 * 3 + 16 * 4 + 16);
}

TEST_CASE("zero dropout is deterministic and equals the dropout-free pass") {
    auto cfg = small_config("gru");
    cfg.dropout = 0.0;
    const RnnNetwork net(cfg, 3, 4, 3);
    std::mt19937_64 rng(9);
    const auto params = net.initialize(rng);
    const auto samples = random_samples(5, 3, cfg.sequence_length, rng);
    std::vector<const SequenceSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);

    std::vector<double> g0(params.size(), 0.0), g1(params.size(), 0.0);
    std::mt19937_64 dropout_rng(1);
    const double l0 = net.loss_and_gradient(params, batch, g0, nullptr);
    const double l1 = net.loss_and_gradient(params, batch, g1, &dropout_rng);
    CHECK(l0 == l1);
    CHECK(g0 == g1);

    cfg.dropout = 0.5;
    const RnnNetwork noisy(cfg, 3, 4, 3);
    std::vector<double> a(params.size(), 0.0), b(params.size(), 0.0);
    std::mt19937_64 ra(3), rb(3);
    CHECK(noisy.loss_and_gradient(params, batch, a, &ra) == noisy.loss_and_gradient(params, batch, b, &rb));
    CHECK(a == b);
}

TEST_CASE("training on zero targets descends") {
    auto cfg = small_config("lstm");
    cfg.adam.learning_rate = 1e-2;
    const RnnNetwork net(cfg, 3, 4, 3);
    std::mt19937_64 rng(4);
    auto samples = random_samples(40, 3, cfg.sequence_length, rng);
    for (auto& s : samples) s.target = 0.0;
    RnnLearner learner(net, samples, {}, 17);
    auto params = learner.initial_parameters();
    const double before = learner.training_loss(params);
    LocalTrainOptions options;
    options.epochs = 30;
    train_local(learner, params, options);
    const double after = learner.training_loss(params);
    CHECK(after < 0.5 * before);
}

TEST_CASE("vocabularies reserve the unknown row") {
    Vocabulary v;
    CHECK(v.size() == 1);
    CHECK(v.add("a") == 1);
    CHECK(v.add("b") == 2);
    CHECK(v.add("a") == 1);
    CHECK(v.index_of("b") == 2);
    CHECK(v.index_of("never seen") == 0);
}

TEST_CASE("configuration names and validation") {
    CHECK(RnnConfig::for_family("bilstm").cell == CellKind::Lstm);
    CHECK(RnnConfig::for_family("bilstm").bidirectional);
    CHECK(RnnConfig::for_family("gru").family_name() == "gru");
    CHECK_THROWS_AS(RnnConfig::for_family("transformer"), ConfigError);
    RnnConfig c;
    CHECK(c.dropout == 0.13);
    CHECK(c.location_embedding == 15);
    CHECK(c.model_embedding == 3);
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.hidden = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("fitted model predicts finite non-negative kW and round-trips") {
    const auto data = small_dataset();
    auto cfg = RnnConfig::for_family("gru");
    cfg.max_epochs = 2;
    const auto model = fit_rnn(data.frames, features::rnn_feature_mask(), cfg, 3);
    CHECK(model.fit_info().epochs_run == 2);
    const auto& frame = data.frames.front();
    const auto rows = frame.rows_for(features::Role::Test);
    REQUIRE_FALSE(rows.empty());
    const auto p = model.predict(frame, rows);
    for (double v : p) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
    }

    std::stringstream s;
    save_model(s, model, data.normalization);
    const auto loaded = load_model(s);
    CHECK(loaded.model->family() == "gru");
    CHECK(loaded.model->parameters() == model.parameters());
    CHECK(loaded.model->predict(frame, rows) == p);

    const auto again = fit_rnn(data.frames, features::rnn_feature_mask(), cfg, 3);
    CHECK(again.parameters() == model.parameters());
}
