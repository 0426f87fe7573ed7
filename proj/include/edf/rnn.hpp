#pragma once

#include "edf/model.hpp"
#include "edf/training.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace edf::forecast {

enum class CellKind { Gru, Lstm };

struct RnnConfig {
    CellKind cell = CellKind::Gru;
    bool bidirectional = false;
    std::size_t hidden = 12;
    std::size_t location_embedding = 15;
    std::size_t model_embedding = 3;
    double dropout = 0.13;
    std::size_t dense = 12;
    std::size_t sequence_length = 48;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    AdamConfig adam;
    double alpha = 0.7;

    void validate() const;
    /// "gru", "lstm", "bigru" or "bilstm".
    std::string family_name() const;
    static RnnConfig for_family(const std::string& name);
};

/// One training example: a window of time-dependent inputs plus static EVSE attributes.
struct SequenceSample {
    std::vector<double> inputs;  // sequence_length × input_dim, row-major, oldest step first
    std::size_t location = 0;    // embedding row; 0 is the unknown category
    std::size_t model = 0;
    double nominal = 0.0;        // normalized nominal power
    double target = 0.0;         // normalized demand of the next bin
};

/// Stateless network: every call takes the flat parameter vector explicitly.
/// Layout per direction: W (G·H × D), U (G·H × H), b (G·H), and for GRU a hidden-side bias
/// b_h (3H); then the location and model embeddings, the dense layer and the output neuron.
/// Gate order is [i, f, g, o] for LSTM and [r, z, n] for GRU.
class RnnNetwork {
public:
    RnnNetwork(const RnnConfig& config, std::size_t input_dim, std::size_t n_locations, std::size_t n_models);

    std::size_t parameter_count() const { return total_; }
    std::size_t recurrent_parameter_count() const;
    std::vector<ParameterBlock> layout() const;
    std::size_t input_dim() const { return input_dim_; }

    /// Uniform(−1/√fan_in, 1/√fan_in) for every block.
    std::vector<double> initialize(std::mt19937_64& rng) const;

    /// Normalized-space forecast with dropout disabled.
    double predict(std::span<const double> params, const SequenceSample& sample) const;

    /// Mean pinball loss over `batch`; accumulates the mean gradient into `grad`. Passing a
    /// generator enables dropout.
    double loss_and_gradient(std::span<const double> params, std::span<const SequenceSample* const> batch,
                             std::span<double> grad, std::mt19937_64* dropout_rng) const;

    /// Forward plus backward arithmetic for one sample, for the energy proxy.
    std::uint64_t training_ops_per_sample() const;
    std::uint64_t inference_ops_per_sample() const;

    const RnnConfig& config() const { return config_; }

private:
    struct DirectionOffsets {
        std::size_t w, u, b, bh;
    };
    struct Trace;

    std::size_t gates() const { return config_.cell == CellKind::Lstm ? 4 : 3; }
    std::size_t directions() const { return config_.bidirectional ? 2 : 1; }
    std::size_t head_width() const;
    double forward(std::span<const double> params, const SequenceSample& sample, const std::vector<double>* mask,
                   Trace* trace) const;
    void backward(std::span<const double> params, const SequenceSample& sample, const Trace& trace, double dloss,
                  std::span<double> grad) const;

    RnnConfig config_;
    std::size_t input_dim_;
    std::size_t n_locations_;
    std::size_t n_models_;
    std::vector<DirectionOffsets> dir_;
    std::size_t emb_loc_ = 0, emb_model_ = 0, dense_w_ = 0, dense_b_ = 0, out_w_ = 0, out_b_ = 0, total_ = 0;
};

/// Training samples and an optional validation set bound to one network, with its own
/// optimizer and shuffling state.
class RnnLearner final : public MinibatchLearner {
public:
    RnnLearner(const RnnNetwork& network, std::vector<SequenceSample> train, std::vector<SequenceSample> validation,
               std::uint64_t seed);

    std::size_t parameter_count() const override { return network_.parameter_count(); }
    std::vector<double> initial_parameters() override;
    double validation_loss(std::span<const double> params) const override;
    bool has_validation() const override { return !validation_.empty(); }

    double training_loss(std::span<const double> params) const;

protected:
    double batch_loss_and_gradient(std::span<const double> params, std::span<const std::size_t> batch,
                                   std::span<double> grad, std::mt19937_64& rng) const override;
    std::uint64_t ops_per_training_sample() const override { return network_.training_ops_per_sample(); }
    std::uint64_t ops_per_validation_pass() const override {
        return network_.inference_ops_per_sample() * validation_.size();
    }

private:
    const RnnNetwork& network_;
    std::vector<SequenceSample> train_;
    std::vector<SequenceSample> validation_;
};

/// Category label → embedding row. Row 0 is reserved for labels unseen during training.
struct Vocabulary {
    std::vector<std::string> labels{"<unk>"};

    std::size_t index_of(const std::string& label) const;
    std::size_t add(const std::string& label);
    std::size_t size() const { return labels.size(); }
};

class RnnModel final : public ForecastModel {
public:
    RnnModel(RnnConfig config, features::FeatureMask mask, Vocabulary locations, Vocabulary models,
             std::vector<double> params, std::uint64_t seed);

    std::string family() const override { return config_.family_name(); }
    nlohmann::ordered_json describe() const override;
    std::vector<double> parameters() const override { return params_; }
    std::vector<ParameterBlock> layout() const override { return network_.layout(); }
    void set_parameters(std::span<const double> params) override;
    std::vector<double> predict(const features::FeatureFrame& frame,
                                std::span<const std::size_t> rows) const override;

    const RnnNetwork& network() const { return network_; }
    const RnnConfig& config() const { return config_; }
    const features::FeatureMask& mask() const { return mask_; }
    const Vocabulary& locations() const { return locations_; }
    const Vocabulary& models() const { return models_; }

    static std::unique_ptr<RnnModel> restore(const nlohmann::ordered_json& description, std::span<const double> params);

private:
    RnnConfig config_;
    features::FeatureMask mask_;
    Vocabulary locations_;
    Vocabulary models_;
    RnnNetwork network_;
    std::vector<double> params_;
    std::uint64_t seed_;
};

/// Vocabularies built from the EVSE attributes of `frames`, in frame order.
void extend_vocabularies(std::span<const features::FeatureFrame> frames, Vocabulary& locations, Vocabulary& models);

/// Window of `sequence_length` rows ending at row k. Requires k + 1 > sequence_length so the
/// window never includes row 0, whose log-delta is undefined.
SequenceSample make_sequence(const features::FeatureFrame& frame, std::size_t k, const features::FeatureMask& mask,
                             std::size_t sequence_length, const Vocabulary& locations, const Vocabulary& models);

std::vector<SequenceSample> make_sequences(std::span<const features::FeatureFrame> frames,
                                           const features::FeatureMask& mask, features::Role role,
                                           std::size_t sequence_length, const Vocabulary& locations,
                                           const Vocabulary& models);

/// Backpropagation-through-time training with Adam on the pinball loss. Early stopping on the
/// validation loss restores the best-validation parameters. Throws TrainingError on an empty
/// training set or a non-finite loss.
RnnModel fit_rnn(std::span<const features::FeatureFrame> train_frames, const features::FeatureMask& mask,
                 const RnnConfig& config, std::uint64_t seed);

}  // namespace edf::forecast
