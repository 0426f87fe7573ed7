#include "edf/rnn.hpp"

#include "edf/pinball.hpp"

#include <algorithm>
#include <cmath>

namespace edf::forecast {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += M x for a row-major rows × cols block.
void matvec_add(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = m + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

// y += Mᵀ x
void matvec_t_add(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = m + r * cols;
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * xr;
    }
}

// G += a bᵀ
void outer_add(double* g, std::size_t rows, std::size_t cols, const double* a, const double* b) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* row = g + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += ar * b[c];
    }
}

std::string cell_name(CellKind kind) { return kind == CellKind::Gru ? "gru" : "lstm"; }

}  // namespace

void RnnConfig::validate() const {
    if (hidden == 0 || location_embedding == 0 || model_embedding == 0 || dense == 0 || sequence_length == 0 ||
        batch_size == 0) {
        throw ConfigError("rnn: dimensions must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("rnn: dropout must lie in [0, 1)");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("rnn: learning rate must be positive");
    PinballConfig{alpha}.validate();
}

std::string RnnConfig::family_name() const { return (bidirectional ? "bi" : "") + cell_name(cell); }

RnnConfig RnnConfig::for_family(const std::string& name) {
    RnnConfig cfg;
    if (name == "gru" || name == "bigru") {
        cfg.cell = CellKind::Gru;
    } else if (name == "lstm" || name == "bilstm") {
        cfg.cell = CellKind::Lstm;
    } else {
        throw ConfigError("unknown recurrent family '" + name + "'");
    }
    cfg.bidirectional = name.starts_with("bi");
    return cfg;
}

struct RnnNetwork::Trace {
    struct Direction {
        std::vector<double> h;     // (T+1) × H, row 0 is the zero initial state
        std::vector<double> c;     // LSTM cell states, (T+1) × H
        std::vector<double> gate;  // T × G·H post-activation gate values
        std::vector<double> hn;    // GRU: T × H, U_n h + b_hn
    };
    std::vector<Direction> dirs;
    std::vector<double> v;     // head input before dropout
    std::vector<double> vd;    // after dropout
    std::vector<double> mask;  // empty when dropout is off
    std::vector<double> z1;
    std::vector<double> a1;
};

RnnNetwork::RnnNetwork(const RnnConfig& config, std::size_t input_dim, std::size_t n_locations, std::size_t n_models)
    : config_(config), input_dim_(input_dim), n_locations_(n_locations), n_models_(n_models) {
    config_.validate();
    if (input_dim_ == 0) throw ConfigError("rnn: input dimension must be positive");
    if (n_locations_ == 0 || n_models_ == 0) throw ConfigError("rnn: vocabularies must not be empty");
    const std::size_t gh = gates() * config_.hidden;
    std::size_t offset = 0;
    for (std::size_t d = 0; d < directions(); ++d) {
        DirectionOffsets o{};
        o.w = offset;
        offset += gh * input_dim_;
        o.u = offset;
        offset += gh * config_.hidden;
        o.b = offset;
        offset += gh;
        o.bh = offset;
        if (config_.cell == CellKind::Gru) offset += gh;
        dir_.push_back(o);
    }
    emb_loc_ = offset;
    offset += n_locations_ * config_.location_embedding;
    emb_model_ = offset;
    offset += n_models_ * config_.model_embedding;
    dense_w_ = offset;
    offset += config_.dense * head_width();
    dense_b_ = offset;
    offset += config_.dense;
    out_w_ = offset;
    offset += config_.dense;
    out_b_ = offset;
    offset += 1;
    total_ = offset;
}

std::size_t RnnNetwork::head_width() const {
    return directions() * config_.hidden + config_.location_embedding + config_.model_embedding + 1;
}

std::size_t RnnNetwork::recurrent_parameter_count() const { return emb_loc_; }

std::vector<ParameterBlock> RnnNetwork::layout() const {
    std::vector<ParameterBlock> blocks;
    const std::size_t gh = gates() * config_.hidden;
    for (std::size_t d = 0; d < directions(); ++d) {
        const std::string prefix = d == 0 ? "rnn.forward." : "rnn.backward.";
        blocks.push_back({prefix + "W", dir_[d].w, gh * input_dim_});
        blocks.push_back({prefix + "U", dir_[d].u, gh * config_.hidden});
        blocks.push_back({prefix + "b", dir_[d].b, gh});
        if (config_.cell == CellKind::Gru) blocks.push_back({prefix + "b_h", dir_[d].bh, gh});
    }
    blocks.push_back({"embedding.location", emb_loc_, n_locations_ * config_.location_embedding});
    blocks.push_back({"embedding.model", emb_model_, n_models_ * config_.model_embedding});
    blocks.push_back({"dense.W", dense_w_, config_.dense * head_width()});
    blocks.push_back({"dense.b", dense_b_, config_.dense});
    blocks.push_back({"output.W", out_w_, config_.dense});
    blocks.push_back({"output.b", out_b_, 1});
    return blocks;
}

std::vector<double> RnnNetwork::initialize(std::mt19937_64& rng) const {
    std::vector<double> params(total_, 0.0);
    auto fill = [&](std::size_t offset, std::size_t size, double fan_in) {
        const double bound = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < size; ++i) params[offset + i] = dist(rng);
    };
    const std::size_t gh = gates() * config_.hidden;
    const auto h = static_cast<double>(config_.hidden);
    for (std::size_t d = 0; d < directions(); ++d) {
        fill(dir_[d].w, gh * input_dim_, static_cast<double>(input_dim_));
        fill(dir_[d].u, gh * config_.hidden, h);
        fill(dir_[d].b, gh, h);
        if (config_.cell == CellKind::Gru) fill(dir_[d].bh, gh, h);
    }
    fill(emb_loc_, n_locations_ * config_.location_embedding, 1.0);
    fill(emb_model_, n_models_ * config_.model_embedding, 1.0);
    fill(dense_w_, config_.dense * head_width(), static_cast<double>(head_width()));
    fill(dense_b_, config_.dense, static_cast<double>(head_width()));
    fill(out_w_, config_.dense, static_cast<double>(config_.dense));
    fill(out_b_, 1, static_cast<double>(config_.dense));
    return params;
}

double RnnNetwork::forward(std::span<const double> params, const SequenceSample& sample,
                           const std::vector<double>* mask, Trace* trace) const {
    const std::size_t T = config_.sequence_length;
    const std::size_t H = config_.hidden;
    const std::size_t D = input_dim_;
    const std::size_t G = gates();
    if (sample.inputs.size() != T * D) throw DataError("rnn: sequence shape does not match the network");
    if (sample.location >= n_locations_ || sample.model >= n_models_) throw DataError("rnn: category out of range");
    const double* p = params.data();

    Trace local;
    Trace& tr = trace != nullptr ? *trace : local;
    tr.dirs.assign(directions(), {});
    std::vector<double> pre(G * H);
    for (std::size_t d = 0; d < directions(); ++d) {
        auto& dt = tr.dirs[d];
        dt.h.assign((T + 1) * H, 0.0);
        dt.gate.assign(T * G * H, 0.0);
        if (config_.cell == CellKind::Lstm) dt.c.assign((T + 1) * H, 0.0);
        if (config_.cell == CellKind::Gru) dt.hn.assign(T * H, 0.0);
        const DirectionOffsets& o = dir_[d];
        for (std::size_t s = 0; s < T; ++s) {
            const std::size_t t = d == 0 ? s : T - 1 - s;
            const double* x = sample.inputs.data() + t * D;
            const double* h_prev = dt.h.data() + s * H;
            double* h_next = dt.h.data() + (s + 1) * H;
            double* gate = dt.gate.data() + s * G * H;
            std::copy(p + o.b, p + o.b + G * H, pre.begin());
            matvec_add(p + o.w, G * H, D, x, pre.data());
            if (config_.cell == CellKind::Lstm) {
                matvec_add(p + o.u, G * H, H, h_prev, pre.data());
                const double* c_prev = dt.c.data() + s * H;
                double* c_next = dt.c.data() + (s + 1) * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const double i = sigmoid(pre[j]);
                    const double f = sigmoid(pre[H + j]);
                    const double g = std::tanh(pre[2 * H + j]);
                    const double og = sigmoid(pre[3 * H + j]);
                    gate[j] = i;
                    gate[H + j] = f;
                    gate[2 * H + j] = g;
                    gate[3 * H + j] = og;
                    c_next[j] = f * c_prev[j] + i * g;
                    h_next[j] = og * std::tanh(c_next[j]);
                }
            } else {
                std::vector<double> hidden_side(p + o.bh, p + o.bh + G * H);
                matvec_add(p + o.u, G * H, H, h_prev, hidden_side.data());
                double* hn = dt.hn.data() + s * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const double r = sigmoid(pre[j] + hidden_side[j]);
                    const double z = sigmoid(pre[H + j] + hidden_side[H + j]);
                    hn[j] = hidden_side[2 * H + j];
                    const double n = std::tanh(pre[2 * H + j] + r * hn[j]);
                    gate[j] = r;
                    gate[H + j] = z;
                    gate[2 * H + j] = n;
                    h_next[j] = (1.0 - z) * n + z * h_prev[j];
                }
            }
        }
    }

    const std::size_t C = head_width();
    tr.v.assign(C, 0.0);
    std::size_t pos = 0;
    for (std::size_t d = 0; d < directions(); ++d) {
        const double* h_final = tr.dirs[d].h.data() + T * H;
        std::copy(h_final, h_final + H, tr.v.begin() + static_cast<std::ptrdiff_t>(pos));
        pos += H;
    }
    const double* loc = p + emb_loc_ + sample.location * config_.location_embedding;
    std::copy(loc, loc + config_.location_embedding, tr.v.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += config_.location_embedding;
    const double* mdl = p + emb_model_ + sample.model * config_.model_embedding;
    std::copy(mdl, mdl + config_.model_embedding, tr.v.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += config_.model_embedding;
    tr.v[pos] = sample.nominal;

    tr.vd = tr.v;
    if (mask != nullptr) {
        tr.mask = *mask;
        for (std::size_t c = 0; c < C; ++c) tr.vd[c] *= tr.mask[c];
    } else {
        tr.mask.clear();
    }
    const std::size_t F = config_.dense;
    tr.z1.assign(p + dense_b_, p + dense_b_ + F);
    matvec_add(p + dense_w_, F, C, tr.vd.data(), tr.z1.data());
    tr.a1.resize(F);
    double y = p[out_b_];
    for (std::size_t j = 0; j < F; ++j) {
        tr.a1[j] = std::max(0.0, tr.z1[j]);
        y += p[out_w_ + j] * tr.a1[j];
    }
    return y;
}

void RnnNetwork::backward(std::span<const double> params, const SequenceSample& sample, const Trace& tr,
                          double dy, std::span<double> grad) const {
    const std::size_t T = config_.sequence_length;
    const std::size_t H = config_.hidden;
    const std::size_t D = input_dim_;
    const std::size_t G = gates();
    const std::size_t C = head_width();
    const std::size_t F = config_.dense;
    const double* p = params.data();
    double* g = grad.data();

    g[out_b_] += dy;
    std::vector<double> dz1(F, 0.0);
    for (std::size_t j = 0; j < F; ++j) {
        g[out_w_ + j] += dy * tr.a1[j];
        dz1[j] = tr.z1[j] > 0.0 ? dy * p[out_w_ + j] : 0.0;
        g[dense_b_ + j] += dz1[j];
    }
    outer_add(g + dense_w_, F, C, dz1.data(), tr.vd.data());
    std::vector<double> dv(C, 0.0);
    matvec_t_add(p + dense_w_, F, C, dz1.data(), dv.data());
    if (!tr.mask.empty()) {
        for (std::size_t c = 0; c < C; ++c) dv[c] *= tr.mask[c];
    }

    std::size_t pos = directions() * H;
    double* g_loc = g + emb_loc_ + sample.location * config_.location_embedding;
    for (std::size_t j = 0; j < config_.location_embedding; ++j) g_loc[j] += dv[pos + j];
    pos += config_.location_embedding;
    double* g_mdl = g + emb_model_ + sample.model * config_.model_embedding;
    for (std::size_t j = 0; j < config_.model_embedding; ++j) g_mdl[j] += dv[pos + j];

    std::vector<double> dh(H), dh_prev(H), dc(H), da(G * H), da_h(G * H);
    for (std::size_t d = 0; d < directions(); ++d) {
        const auto& dt = tr.dirs[d];
        const DirectionOffsets& o = dir_[d];
        std::copy(dv.begin() + static_cast<std::ptrdiff_t>(d * H), dv.begin() + static_cast<std::ptrdiff_t>((d + 1) * H),
                  dh.begin());
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t s = T; s-- > 0;) {
            const std::size_t t = d == 0 ? s : T - 1 - s;
            const double* x = sample.inputs.data() + t * D;
            const double* h_prev = dt.h.data() + s * H;
            const double* gate = dt.gate.data() + s * G * H;
            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            if (config_.cell == CellKind::Lstm) {
                const double* c_prev = dt.c.data() + s * H;
                const double* c_next = dt.c.data() + (s + 1) * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const double i = gate[j], f = gate[H + j], gg = gate[2 * H + j], og = gate[3 * H + j];
                    const double tc = std::tanh(c_next[j]);
                    const double d_o = dh[j] * tc;
                    dc[j] += dh[j] * og * (1.0 - tc * tc);
                    da[j] = dc[j] * gg * i * (1.0 - i);
                    da[H + j] = dc[j] * c_prev[j] * f * (1.0 - f);
                    da[2 * H + j] = dc[j] * i * (1.0 - gg * gg);
                    da[3 * H + j] = d_o * og * (1.0 - og);
                    dc[j] *= f;
                }
                outer_add(g + o.w, G * H, D, da.data(), x);
                outer_add(g + o.u, G * H, H, da.data(), h_prev);
                for (std::size_t k = 0; k < G * H; ++k) g[o.b + k] += da[k];
                matvec_t_add(p + o.u, G * H, H, da.data(), dh_prev.data());
            } else {
                const double* hn = dt.hn.data() + s * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const double r = gate[j], z = gate[H + j], n = gate[2 * H + j];
                    const double dn = dh[j] * (1.0 - z);
                    const double dz = dh[j] * (h_prev[j] - n);
                    dh_prev[j] = dh[j] * z;
                    const double dan = dn * (1.0 - n * n);
                    const double dr = dan * hn[j];
                    const double dar = dr * r * (1.0 - r);
                    const double daz = dz * z * (1.0 - z);
                    da[j] = dar;
                    da[H + j] = daz;
                    da[2 * H + j] = dan;
                    da_h[j] = dar;
                    da_h[H + j] = daz;
                    da_h[2 * H + j] = dan * r;
                }
                outer_add(g + o.w, G * H, D, da.data(), x);
                for (std::size_t k = 0; k < G * H; ++k) {
                    g[o.b + k] += da[k];
                    g[o.bh + k] += da_h[k];
                }
                outer_add(g + o.u, G * H, H, da_h.data(), h_prev);
                matvec_t_add(p + o.u, G * H, H, da_h.data(), dh_prev.data());
            }
            std::swap(dh, dh_prev);
        }
    }
}

double RnnNetwork::predict(std::span<const double> params, const SequenceSample& sample) const {
    return forward(params, sample, nullptr, nullptr);
}

double RnnNetwork::loss_and_gradient(std::span<const double> params, std::span<const SequenceSample* const> batch,
                                     std::span<double> grad, std::mt19937_64* dropout_rng) const {
    if (batch.empty()) return 0.0;
    if (grad.size() != total_) throw DataError("rnn: gradient buffer has the wrong size");
    const double n = static_cast<double>(batch.size());
    const std::size_t C = head_width();
    const bool use_dropout = dropout_rng != nullptr && config_.dropout > 0.0;
    const double keep_scale = 1.0 / (1.0 - config_.dropout);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> mask(C, 1.0);
    Trace trace;
    double loss = 0.0;
    for (const SequenceSample* sample : batch) {
        if (use_dropout) {
            for (double& m : mask) m = unit(*dropout_rng) < config_.dropout ? 0.0 : keep_scale;
        }
        const double y = forward(params, *sample, use_dropout ? &mask : nullptr, &trace);
        loss += pinball_point(sample->target, y, config_.alpha);
        backward(params, *sample, trace, pinball_slope(sample->target, y, config_.alpha) / n, grad);
    }
    return loss / n;
}

std::uint64_t RnnNetwork::inference_ops_per_sample() const {
    const std::uint64_t gh = gates() * config_.hidden;
    const std::uint64_t per_step = gh * (input_dim_ + config_.hidden) + 4 * config_.hidden;
    return directions() * config_.sequence_length * per_step + config_.dense * (head_width() + 1);
}

std::uint64_t RnnNetwork::training_ops_per_sample() const { return 3 * inference_ops_per_sample(); }

RnnLearner::RnnLearner(const RnnNetwork& network, std::vector<SequenceSample> train,
                       std::vector<SequenceSample> validation, std::uint64_t seed)
    : MinibatchLearner(network.parameter_count(), train.size(), network.config().batch_size, network.config().adam,
                       seed),
      network_(network),
      train_(std::move(train)),
      validation_(std::move(validation)) {}

std::vector<double> RnnLearner::initial_parameters() { return network_.initialize(rng()); }

double RnnLearner::batch_loss_and_gradient(std::span<const double> params, std::span<const std::size_t> batch,
                                           std::span<double> grad, std::mt19937_64& rng) const {
    std::vector<const SequenceSample*> samples;
    samples.reserve(batch.size());
    for (std::size_t i : batch) samples.push_back(&train_[i]);
    return network_.loss_and_gradient(params, samples, grad, &rng);
}

double RnnLearner::validation_loss(std::span<const double> params) const {
    if (validation_.empty()) return 0.0;
    double loss = 0.0;
    for (const auto& s : validation_) loss += pinball_point(s.target, network_.predict(params, s), network_.config().alpha);
    return loss / static_cast<double>(validation_.size());
}

double RnnLearner::training_loss(std::span<const double> params) const {
    double loss = 0.0;
    for (const auto& s : train_) loss += pinball_point(s.target, network_.predict(params, s), network_.config().alpha);
    return train_.empty() ? 0.0 : loss / static_cast<double>(train_.size());
}

std::size_t Vocabulary::index_of(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? 0 : static_cast<std::size_t>(it - labels.begin());
}

std::size_t Vocabulary::add(const std::string& label) {
    const std::size_t i = index_of(label);
    if (i != 0 || label == labels.front()) return i;
    labels.push_back(label);
    return labels.size() - 1;
}

RnnModel::RnnModel(RnnConfig config, features::FeatureMask mask, Vocabulary locations, Vocabulary models,
                   std::vector<double> params, std::uint64_t seed)
    : config_(config),
      mask_(std::move(mask)),
      locations_(std::move(locations)),
      models_(std::move(models)),
      network_(config_, mask_.size(), locations_.size(), models_.size()),
      seed_(seed) {
    set_parameters(params);
}

void RnnModel::set_parameters(std::span<const double> params) {
    if (params.size() != network_.parameter_count()) throw DataError("rnn: parameter vector has the wrong length");
    params_.assign(params.begin(), params.end());
}

nlohmann::ordered_json RnnModel::describe() const {
    nlohmann::ordered_json d;
    d["hyperparameters"] = {{"cell", cell_name(config_.cell)},
                            {"bidirectional", config_.bidirectional},
                            {"hidden", config_.hidden},
                            {"location_embedding", config_.location_embedding},
                            {"model_embedding", config_.model_embedding},
                            {"dropout", config_.dropout},
                            {"dense", config_.dense},
                            {"sequence_length", config_.sequence_length},
                            {"batch_size", config_.batch_size},
                            {"max_epochs", config_.max_epochs},
                            {"patience", config_.patience},
                            {"learning_rate", config_.adam.learning_rate},
                            {"beta1", config_.adam.beta1},
                            {"beta2", config_.adam.beta2},
                            {"epsilon", config_.adam.epsilon},
                            {"alpha", config_.alpha},
                            {"seed", seed_}};
    d["vocabularies"] = {{"location", locations_.labels}, {"model", models_.labels}};
    d["feature_columns"] = features::mask_names(mask_);
    return d;
}

std::unique_ptr<RnnModel> RnnModel::restore(const nlohmann::ordered_json& description, std::span<const double> params) {
    const auto& h = description.at("hyperparameters");
    RnnConfig cfg;
    cfg.cell = h.at("cell").get<std::string>() == "lstm" ? CellKind::Lstm : CellKind::Gru;
    cfg.bidirectional = h.at("bidirectional").get<bool>();
    cfg.hidden = h.at("hidden").get<std::size_t>();
    cfg.location_embedding = h.at("location_embedding").get<std::size_t>();
    cfg.model_embedding = h.at("model_embedding").get<std::size_t>();
    cfg.dropout = h.at("dropout").get<double>();
    cfg.dense = h.at("dense").get<std::size_t>();
    cfg.sequence_length = h.at("sequence_length").get<std::size_t>();
    cfg.batch_size = h.at("batch_size").get<std::size_t>();
    cfg.max_epochs = h.at("max_epochs").get<std::size_t>();
    cfg.patience = h.at("patience").get<std::size_t>();
    cfg.adam.learning_rate = h.at("learning_rate").get<double>();
    cfg.adam.beta1 = h.at("beta1").get<double>();
    cfg.adam.beta2 = h.at("beta2").get<double>();
    cfg.adam.epsilon = h.at("epsilon").get<double>();
    cfg.alpha = h.at("alpha").get<double>();
    Vocabulary locations{description.at("vocabularies").at("location").get<std::vector<std::string>>()};
    Vocabulary models{description.at("vocabularies").at("model").get<std::vector<std::string>>()};
    auto mask = features::parse_mask(description.at("feature_columns").get<std::vector<std::string>>());
    std::vector<double> p(params.begin(), params.end());
    return std::make_unique<RnnModel>(cfg, std::move(mask), std::move(locations), std::move(models), std::move(p),
                                      h.at("seed").get<std::uint64_t>());
}

std::vector<double> RnnModel::predict(const features::FeatureFrame& frame, std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t k : rows) {
        const auto sample = make_sequence(frame, k, mask_, config_.sequence_length, locations_, models_);
        out.push_back(to_kw(network_.predict(params_, sample), frame.power_scale_kw));
    }
    return out;
}

void extend_vocabularies(std::span<const features::FeatureFrame> frames, Vocabulary& locations, Vocabulary& models) {
    for (const auto& f : frames) {
        locations.add(f.location_key);
        models.add(f.evse_model);
    }
}

SequenceSample make_sequence(const features::FeatureFrame& frame, std::size_t k, const features::FeatureMask& mask,
                             std::size_t sequence_length, const Vocabulary& locations, const Vocabulary& models) {
    if (k + 1 <= sequence_length || k >= frame.rows()) throw DataError("rnn: row lacks a full input window");
    SequenceSample s;
    s.inputs.reserve(sequence_length * mask.size());
    for (std::size_t t = k + 1 - sequence_length; t <= k; ++t) {
        for (features::Column c : mask) s.inputs.push_back(frame.at(t, c));
    }
    s.location = locations.index_of(frame.location_key);
    s.model = models.index_of(frame.evse_model);
    s.nominal = frame.at(k, features::Column::NominalPower);
    s.target = frame.target[k];
    return s;
}

std::vector<SequenceSample> make_sequences(std::span<const features::FeatureFrame> frames,
                                           const features::FeatureMask& mask, features::Role role,
                                           std::size_t sequence_length, const Vocabulary& locations,
                                           const Vocabulary& models) {
    std::vector<SequenceSample> out;
    for (const auto& f : frames) {
        for (std::size_t k : f.rows_for(role)) {
            if (k + 1 <= sequence_length) continue;
            out.push_back(make_sequence(f, k, mask, sequence_length, locations, models));
        }
    }
    return out;
}

RnnModel fit_rnn(std::span<const features::FeatureFrame> train_frames, const features::FeatureMask& mask,
                 const RnnConfig& config, std::uint64_t seed) {
    Vocabulary locations;
    Vocabulary models;
    extend_vocabularies(train_frames, locations, models);
    auto train = make_sequences(train_frames, mask, features::Role::Train, config.sequence_length, locations, models);
    auto validation =
        make_sequences(train_frames, mask, features::Role::Validation, config.sequence_length, locations, models);
    if (train.empty()) throw TrainingError("rnn: empty training set");

    const RnnNetwork network(config, mask.size(), locations.size(), models.size());
    RnnLearner learner(network, std::move(train), std::move(validation), seed);
    std::vector<double> params = learner.initial_parameters();
    const auto report = train_local(learner, params, {config.max_epochs, config.patience});

    RnnModel model(config, mask, std::move(locations), std::move(models), std::move(params), seed);
    FitInfo& info = model.mutable_fit_info();
    info.epochs_run = report.epochs.size();
    info.ops = report.ops();
    for (const auto& e : report.epochs) {
        info.train_losses.push_back(e.train_loss);
        info.validation_losses.push_back(e.validation_loss);
        info.epoch_ops.push_back(e.ops);
        info.epoch_seconds.push_back(e.seconds);
    }
    return model;
}

}  // namespace edf::forecast
