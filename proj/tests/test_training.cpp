#include "edf/training.hpp"
#include "edf/util.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

using namespace edf;
using namespace edf::forecast;

namespace {

/// Epoch e moves the single parameter to e+1 and reports a scripted validation loss.
class ScriptedLearner final : public LocalLearner {
public:
    explicit ScriptedLearner(std::vector<double> script) : script_(std::move(script)) {}

    std::size_t parameter_count() const override { return 1; }
    std::vector<double> initial_parameters() override { return {0.0}; }
    EpochStats train_epoch(std::vector<double>& params, const ProxTerm*) override {
        params[0] += 1.0;
        EpochStats s;
        s.train_loss = 1.0;
        s.validation_loss = script_.at(epoch_++);
        s.ops = 10;
        return s;
    }
    double validation_loss(std::span<const double>) const override { return 0.0; }
    bool has_validation() const override { return true; }
    std::size_t sample_count() const override { return 1; }

private:
    std::vector<double> script_;
    std::size_t epoch_ = 0;
};

/// Mean of ½‖w − c_i‖² over a set of centres.
class QuadraticLearner final : public MinibatchLearner {
public:
    QuadraticLearner(std::vector<std::vector<double>> centres, AdamConfig adam, std::uint64_t seed, bool poison = false)
        : MinibatchLearner(centres.front().size(), centres.size(), 2, adam, seed),
          centres_(std::move(centres)),
          poison_(poison) {}

    std::size_t parameter_count() const override { return centres_.front().size(); }
    std::vector<double> initial_parameters() override { return std::vector<double>(centres_.front().size(), 0.0); }
    double validation_loss(std::span<const double>) const override { return 0.0; }
    bool has_validation() const override { return false; }

protected:
    double batch_loss_and_gradient(std::span<const double> params, std::span<const std::size_t> batch,
                                   std::span<double> grad, std::mt19937_64&) const override {
        if (poison_) return std::numeric_limits<double>::quiet_NaN();
        double loss = 0.0;
        for (std::size_t i : batch) {
            for (std::size_t j = 0; j < params.size(); ++j) {
                const double d = params[j] - centres_[i][j];
                loss += 0.5 * d * d;
                grad[j] += d / static_cast<double>(batch.size());
            }
        }
        return loss / static_cast<double>(batch.size());
    }
    std::uint64_t ops_per_training_sample() const override { return 1; }
    std::uint64_t ops_per_validation_pass() const override { return 0; }

private:
    std::vector<std::vector<double>> centres_;
    bool poison_;
};

}  // namespace

TEST_CASE("adam first step moves each coordinate by the learning rate") {
    AdamConfig c;
    c.learning_rate = 0.01;
    Adam adam(c, 3);
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{4.0, -0.25, 1e-3};
    adam.step(p, g);
    CHECK(adam.steps() == 1);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-9));
    CHECK(p[2] == doctest::Approx(0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam second step matches the bias-corrected recursion") {
    AdamConfig c;
    Adam adam(c, 1);
    std::vector<double> p{0.0};
    adam.step(p, std::vector<double>{2.0});
    const double after_first = p[0];
    adam.step(p, std::vector<double>{-1.0});
    const double m = 0.9 * 0.1 * 2.0 + 0.1 * -1.0;
    const double v = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
    const double m_hat = m / (1.0 - 0.81);
    const double v_hat = v / (1.0 - 0.999 * 0.999);
    CHECK(p[0] == doctest::Approx(after_first - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("proximal gradient matches the penalty's central differences") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> w(6), anchor(6);
        for (auto& v : w) v = u(rng);
        for (auto& v : anchor) v = u(rng);
        const ProxTerm prox{anchor, 0.5 + trial};
        std::vector<double> g(6, 0.0);
        add_prox_gradient(g, w, &prox);
        for (std::size_t j = 0; j < 6; ++j) {
            auto up = w, down = w;
            up[j] += 1e-6;
            down[j] -= 1e-6;
            const double fd = (prox_penalty(up, &prox) - prox_penalty(down, &prox)) / 2e-6;
            CHECK(std::abs(fd - g[j]) <= 1e-6 * std::max(1.0, std::abs(g[j])));
        }
    }
    std::vector<double> g{1.0, 2.0};
    const std::vector<double> w{3.0, 4.0}, anchor{0.0, 0.0};
    const ProxTerm off{anchor, 0.0};
    add_prox_gradient(g, w, &off);
    add_prox_gradient(g, w, nullptr);
    CHECK(g == std::vector<double>{1.0, 2.0});
    CHECK(prox_penalty(w, &off) == 0.0);
    const ProxTerm on{anchor, 2.0};
    CHECK(prox_penalty(w, &on) == 25.0);
}

TEST_CASE("early stopping restores the best-validation parameters") {
    ScriptedLearner learner({5.0, 4.0, 3.0, 3.5, 3.6, 1.0});
    std::vector<double> p{0.0};
    const auto r = train_local(learner, p, {6, 2});
    CHECK(r.early_stopped);
    CHECK(r.epochs.size() == 5);
    CHECK(r.best_epoch == 2);
    CHECK(r.best_validation == 3.0);
    CHECK(p[0] == 3.0);
    CHECK(r.ops() == 50);
}

TEST_CASE("zero patience runs every epoch and keeps the last parameters") {
    ScriptedLearner learner({5.0, 4.0, 3.0, 3.5, 3.6, 1.0});
    std::vector<double> p{0.0};
    const auto r = train_local(learner, p, {6, 0});
    CHECK_FALSE(r.early_stopped);
    CHECK(r.epochs.size() == 6);
    CHECK(r.best_epoch == 5);
    CHECK(p[0] == 6.0);
}

TEST_CASE("minibatch training reaches the mean of the centres") {
    AdamConfig c;
    c.learning_rate = 0.05;
    QuadraticLearner learner({{1.0, -1.0}, {3.0, 1.0}, {2.0, 0.0}, {2.0, 0.0}}, c, 3);
    auto p = learner.initial_parameters();
    train_local(learner, p, {400, 0});
    CHECK(p[0] == doctest::Approx(2.0).epsilon(0.02));
    CHECK(std::abs(p[1]) < 0.05);
}

TEST_CASE("non-finite losses abort training") {
    QuadraticLearner learner({{1.0}}, AdamConfig{}, 1, true);
    auto p = learner.initial_parameters();
    CHECK_THROWS_AS(train_local(learner, p, {1, 0}), TrainingError);
}
