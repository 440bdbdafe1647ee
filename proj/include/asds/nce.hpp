#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/autodiff.hpp"
#include "asds/eval.hpp"
#include "asds/query_library.hpp"
#include "asds/rng.hpp"
#include "asds/serialize.hpp"

namespace asds {

/// Architecture of the neighbor-context detector. Width D is the size of
/// each embedding term; per-tap token blocks are concatenated and then
/// projected to the encoder width H.
struct NceConfig {
    int k = 50;             // neighbors per tap
    int D = 16;             // embedding size
    int H = 64;             // encoder width, divisible by heads
    int heads = 8;          // attention heads
    int ffn_hidden = 64;    // encoder feed-forward width
    int head_hidden = 32;   // classification-head hidden width
    double dropout = 0.1;   // head dropout rate (training mode only)
    double t = 10000.0;     // position-embedding wavelength base
    bool use_position = true;

    void check() const {
        require(k >= 1 && D >= 1 && H >= 1, "nce: k, D, H must be positive");
        require(heads >= 1 && H % heads == 0, "nce: H must be divisible by heads");
        require(ffn_hidden >= 1 && head_hidden >= 1, "nce: hidden widths must be positive");
        require(dropout >= 0 && dropout < 1, "nce: dropout must be in [0, 1)");
        require(t > 1, "nce: t must exceed 1");
    }

    std::size_t seq_len() const { return static_cast<std::size_t>(k) + 1; }
};

inline void to_json(nlohmann::ordered_json& j, const NceConfig& c) {
    j = {{"k", c.k},
         {"D", c.D},
         {"H", c.H},
         {"heads", c.heads},
         {"ffn_hidden", c.ffn_hidden},
         {"head_hidden", c.head_hidden},
         {"dropout", c.dropout},
         {"t", c.t},
         {"use_position", c.use_position}};
}

inline void from_json(const nlohmann::json& j, NceConfig& c) {
    c.k = j.value("k", c.k);
    c.D = j.value("D", c.D);
    c.H = j.value("H", c.H);
    c.heads = j.value("heads", c.heads);
    c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.t = j.value("t", c.t);
    c.use_position = j.value("use_position", c.use_position);
}

/// Label embedding: row `class_index` of the trainable table W (C x D).
template <typename T>
std::vector<T> embed_label(const Tensor<T>& table, int class_index) {
    require(table.rank() == 2, "embed_label: table must be a matrix");
    require(class_index >= 0 && static_cast<std::size_t>(class_index) < table.rows(),
            "embed_label: class index out of range");
    const T* row = table.row(static_cast<std::size_t>(class_index));
    return std::vector<T>(row, row + table.cols());
}

/// Distance embedding: the scalar replicated D times.
template <typename T = double>
std::vector<T> embed_distance(double d, int D) {
    require(d >= 0, "embed_distance: distance must be >= 0");
    require(D >= 1, "embed_distance: D must be positive");
    return std::vector<T>(static_cast<std::size_t>(D), static_cast<T>(d));
}

/// Sinusoidal position embedding: component j is sin(i / t^(j/D)) for
/// even j and cos(i / t^(j/D)) for odd j.
template <typename T = double>
std::vector<T> embed_position(int i, double t, int D) {
    require(i >= 0, "embed_position: position must be >= 0");
    require(D >= 1, "embed_position: D must be positive");
    require(t > 1, "embed_position: t must exceed 1");
    std::vector<T> out(static_cast<std::size_t>(D));
    for (int j = 0; j < D; ++j) {
        const double angle = i / std::pow(t, static_cast<double>(j) / D);
        out[static_cast<std::size_t>(j)] =
            static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
    return out;
}

/// Token sequence for one context: row 0 is the CLS token (zero label
/// and distance embeddings, position 0), row i is neighbor i with its
/// three embedding terms summed; tap blocks are concatenated.
template <typename T>
Tensor<T> compose_tokens(const NeighborContext& ctx, const std::vector<Tensor<T>>& label_tables,
                         const NceConfig& cfg) {
    cfg.check();
    require(ctx.taps.size() == label_tables.size(), "compose_tokens: tap count mismatch");
    const std::size_t taps = ctx.taps.size();
    const std::size_t S = cfg.seq_len();
    const auto D = static_cast<std::size_t>(cfg.D);
    for (const auto& tap : ctx.taps)
        require(tap.labels.size() == static_cast<std::size_t>(cfg.k),
                "compose_tokens: context k mismatch");
    for (const auto& table : label_tables)
        require(table.cols() == D, "compose_tokens: table width mismatch");

    Tensor<T> tokens({S, D * taps});
    tokens.fill(T(0));
    for (std::size_t s = 0; s < S; ++s) {
        const std::vector<T> pos = cfg.use_position
                                       ? embed_position<T>(static_cast<int>(s), cfg.t, cfg.D)
                                       : std::vector<T>(D, T(0));
        for (std::size_t ti = 0; ti < taps; ++ti) {
            T* block = tokens.row(s) + ti * D;
            if (s == 0) {
                for (std::size_t j = 0; j < D; ++j) block[j] = pos[j];
                continue;
            }
            const auto label = embed_label(label_tables[ti], ctx.taps[ti].labels[s - 1]);
            const T dist = static_cast<T>(ctx.taps[ti].distances[s - 1]);
            for (std::size_t j = 0; j < D; ++j) block[j] = label[j] + dist + pos[j];
        }
    }
    return tokens;
}

/// Contexts plus binary detection labels (clean/noisy = 0, adversarial
/// = 1); what the detector trains and scores on.
struct DetectionDataset {
    std::vector<NeighborContext> contexts;
    std::vector<char> labels;

    std::size_t size() const { return labels.size(); }

    void append(const std::vector<NeighborContext>& ctxs, char label) {
        for (const auto& c : ctxs) {
            contexts.push_back(c);
            labels.push_back(label);
        }
    }
};

/// The detector: per-tap label embedding tables, a one-layer transformer
/// encoder over the composed tokens, and a two-layer per-token head.
/// Only the CLS probability is consumed downstream.
template <typename T>
class NceDetector {
public:
    NceDetector() = default;

    NceDetector(NceConfig cfg, std::vector<int> taps, int classes, std::uint64_t seed)
        : cfg_(cfg), taps_(std::move(taps)), classes_(classes), seed_(seed) {
        cfg_.check();
        require(!taps_.empty(), "nce: need at least one tap");
        require(classes_ >= 2, "nce: classes must be >= 2");
        Rng rng(seed);
        const auto D = static_cast<std::size_t>(cfg_.D);
        const auto H = static_cast<std::size_t>(cfg_.H);
        const auto F = static_cast<std::size_t>(cfg_.ffn_hidden);
        const auto HH = static_cast<std::size_t>(cfg_.head_hidden);
        const std::size_t width = D * taps_.size();

        const auto dense = [&](std::size_t in, std::size_t out) {
            Tensor<T> w({in, out});
            const double scale = std::sqrt(1.0 / static_cast<double>(in));
            for (auto& v : w.vec()) v = static_cast<T>(scale * rng.normal());
            return w;
        };
        const auto zeros = [&](std::size_t n) {
            Tensor<T> b({n});
            b.fill(T(0));
            return b;
        };
        const auto ones = [&](std::size_t n) {
            Tensor<T> g({n});
            g.fill(T(1));
            return g;
        };

        for (std::size_t ti = 0; ti < taps_.size(); ++ti) {
            Tensor<T> w({static_cast<std::size_t>(classes_), D});
            for (auto& v : w.vec()) v = static_cast<T>(0.1 * rng.normal());
            params_["emb" + std::to_string(ti)] = std::move(w);
        }
        params_["proj_w"] = dense(width, H);
        params_["proj_b"] = zeros(H);
        for (const char* n : {"attn_wq", "attn_wk", "attn_wv", "attn_wo"})
            params_[n] = dense(H, H);
        for (const char* n : {"attn_bq", "attn_bk", "attn_bv", "attn_bo"})
            params_[n] = zeros(H);
        params_["ln1_g"] = ones(H);
        params_["ln1_b"] = zeros(H);
        params_["ffn_w1"] = dense(H, F);
        params_["ffn_b1"] = zeros(F);
        params_["ffn_w2"] = dense(F, H);
        params_["ffn_b2"] = zeros(H);
        params_["ln2_g"] = ones(H);
        params_["ln2_b"] = zeros(H);
        params_["head_w1"] = dense(H, HH);
        params_["head_b1"] = zeros(HH);
        params_["head_w2"] = dense(HH, 1);
        params_["head_b2"] = zeros(1);
    }

    const NceConfig& config() const { return cfg_; }
    const std::vector<int>& taps() const { return taps_; }
    int classes() const { return classes_; }
    std::uint64_t seed() const { return seed_; }
    double validation_auroc() const { return val_auroc_; }
    void set_validation_auroc(double v) { val_auroc_ = v; }

    std::map<std::string, Tensor<T>>& params() { return params_; }
    const std::map<std::string, Tensor<T>>& params() const { return params_; }

    const std::vector<Tensor<T>> label_tables() const {
        std::vector<Tensor<T>> tables;
        for (std::size_t ti = 0; ti < taps_.size(); ++ti)
            tables.push_back(params_.at("emb" + std::to_string(ti)));
        return tables;
    }

    /// Encoder + head over already-registered parameter vars. `tokens`
    /// is [batch*seq, width]; returns per-token logits [batch*seq, 1].
    typename Tape<T>::Var encode(Tape<T>& tape,
                                 const std::map<std::string, typename Tape<T>::Var>& pv,
                                 typename Tape<T>::Var tokens, std::size_t batch, std::size_t seq,
                                 bool train_mode, Rng* rng) const {
        const auto P = [&](const std::string& n) { return pv.at(n); };
        const auto heads = static_cast<std::size_t>(cfg_.heads);

        auto x = tape.add_bias(tape.matmul(tokens, P("proj_w")), P("proj_b"));
        const auto q = tape.add_bias(tape.matmul(x, P("attn_wq")), P("attn_bq"));
        const auto k = tape.add_bias(tape.matmul(x, P("attn_wk")), P("attn_bk"));
        const auto v = tape.add_bias(tape.matmul(x, P("attn_wv")), P("attn_bv"));
        const auto mixed = tape.attention(q, k, v, batch, seq, heads);
        const auto o = tape.add_bias(tape.matmul(mixed, P("attn_wo")), P("attn_bo"));
        const auto x1 = tape.add_bias(
            tape.row_scale(tape.layer_norm_rows(tape.add(x, o)), P("ln1_g")), P("ln1_b"));
        const auto f = tape.relu(tape.add_bias(tape.matmul(x1, P("ffn_w1")), P("ffn_b1")));
        const auto f2 = tape.add_bias(tape.matmul(f, P("ffn_w2")), P("ffn_b2"));
        const auto x2 = tape.add_bias(
            tape.row_scale(tape.layer_norm_rows(tape.add(x1, f2)), P("ln2_g")), P("ln2_b"));

        auto h = tape.relu(tape.add_bias(tape.matmul(x2, P("head_w1")), P("head_b1")));
        if (train_mode && cfg_.dropout > 0) {
            require(rng != nullptr, "nce: train-mode forward needs an rng for dropout");
            const Tensor<T>& hv = tape.value(h);
            Tensor<T> mask(hv.shape());
            const double keep = 1.0 - cfg_.dropout;
            for (auto& m : mask.vec())
                m = rng->uniform() < keep ? static_cast<T>(1.0 / keep) : T(0);
            h = tape.mul(h, tape.constant(mask));
        }
        return tape.add_bias(tape.matmul(h, P("head_w2")), P("head_b2"));
    }

    /// Per-token probabilities for one composed token sequence. Training
    /// mode applies dropout (rng required); eval mode is deterministic.
    std::vector<T> forward_tokens(const Tensor<T>& tokens, bool train_mode = false,
                                  Rng* rng = nullptr) const {
        const std::size_t S = cfg_.seq_len();
        require(tokens.rank() == 2 && tokens.rows() == S, "nce_forward: sequence length mismatch");
        require(tokens.cols() == static_cast<std::size_t>(cfg_.D) * taps_.size(),
                "nce_forward: token width mismatch");
        Tape<T> tape;
        std::map<std::string, typename Tape<T>::Var> pv;
        for (const auto& [name, tensor] : params_) pv[name] = tape.constant(tensor);
        const auto z = encode(tape, pv, tape.constant(tokens), 1, S, train_mode, rng);
        const Tensor<T>& probs = tape.value(tape.sigmoid(z));
        return std::vector<T>(probs.vec().begin(), probs.vec().end());
    }

    /// CLS probability for one retrieval context (eval mode).
    double score(const NeighborContext& ctx) const {
        const Tensor<T> tokens = compose_tokens(ctx, label_tables(), cfg_);
        return static_cast<double>(forward_tokens(tokens)[0]);
    }

    /// CLS probabilities for many contexts, batched through the encoder.
    std::vector<double> score_batch(const std::vector<NeighborContext>& ctxs,
                                    std::size_t chunk = 64) const {
        std::vector<double> out;
        out.reserve(ctxs.size());
        const std::size_t S = cfg_.seq_len();
        const std::size_t width = static_cast<std::size_t>(cfg_.D) * taps_.size();
        const auto tables = label_tables();
        for (std::size_t start = 0; start < ctxs.size(); start += chunk) {
            const std::size_t stop = std::min(ctxs.size(), start + chunk);
            const std::size_t B = stop - start;
            Tensor<T> tokens({B * S, width});
            for (std::size_t b = 0; b < B; ++b) {
                const Tensor<T> seq = compose_tokens(ctxs[start + b], tables, cfg_);
                std::copy(seq.data(), seq.data() + seq.numel(), tokens.row(b * S));
            }
            Tape<T> tape;
            std::map<std::string, typename Tape<T>::Var> pv;
            for (const auto& [name, tensor] : params_) pv[name] = tape.constant(tensor);
            const auto z = encode(tape, pv, tape.constant(tokens), B, S, false, nullptr);
            const Tensor<T>& zl = tape.value(z);
            for (std::size_t b = 0; b < B; ++b)
                out.push_back(static_cast<double>(Tape<T>::sigmoid_scalar(zl(b * S, 0))));
        }
        return out;
    }

private:
    NceConfig cfg_;
    std::vector<int> taps_;
    int classes_ = 0;
    std::uint64_t seed_ = 0;
    double val_auroc_ = 0;
    std::map<std::string, Tensor<T>> params_;
};

struct NceTrainSpec {
    int epochs = 12;
    std::size_t batch = 32;
    double learning_rate = 0.02;
    double momentum = 0.9;
    std::uint64_t seed = 1;
};

struct NceTrainLog {
    std::vector<double> epoch_loss;
    std::vector<double> val_auroc;
    double best_val_auroc = 0;
    int best_epoch = -1;
};

/// Trains the detector with minibatch SGD + momentum on the CLS binary
/// cross-entropy, positives weighted so both classes contribute equal
/// mass. Keeps the best-validation-AUROC parameters. Deterministic for a
/// fixed seed.
template <typename T>
NceTrainLog train_detector(NceDetector<T>& det, const DetectionDataset& train,
                           const DetectionDataset& val, const NceTrainSpec& spec) {
    require(spec.epochs >= 1 && spec.batch >= 1, "train_detector: bad epochs/batch");
    require(train.size() >= 2 && val.size() >= 2, "train_detector: datasets too small");
    std::size_t n_pos = 0;
    for (char y : train.labels) n_pos += y != 0;
    const std::size_t n_neg = train.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw TrainingError("detector training set contains a single class");
    bool val_has_pos = false, val_has_neg = false;
    for (char y : val.labels) (y ? val_has_pos : val_has_neg) = true;
    require(val_has_pos && val_has_neg, "train_detector: validation set needs both classes");

    const NceConfig& cfg = det.config();
    const std::size_t S = cfg.seq_len();
    const auto D = static_cast<std::size_t>(cfg.D);
    const std::size_t taps = det.taps().size();
    const std::size_t width = D * taps;
    const T w_pos = static_cast<T>(double(train.size()) / (2.0 * double(n_pos)));
    const T w_neg = static_cast<T>(double(train.size()) / (2.0 * double(n_neg)));

    // Position + distance parts are parameter-free; the trainable label
    // embedding joins on-tape via gather so its gradient flows.
    const auto const_part_for = [&](const NeighborContext& ctx) {
        Tensor<T> part({S, width});
        for (std::size_t s = 0; s < S; ++s) {
            const std::vector<T> pos = cfg.use_position
                                           ? embed_position<T>(static_cast<int>(s), cfg.t, cfg.D)
                                           : std::vector<T>(D, T(0));
            for (std::size_t ti = 0; ti < taps; ++ti) {
                T* block = part.row(s) + ti * D;
                const T dist = s == 0 ? T(0) : static_cast<T>(ctx.taps[ti].distances[s - 1]);
                for (std::size_t j = 0; j < D; ++j) block[j] = dist + pos[j];
            }
        }
        return part;
    };

    Rng shuffle_rng(spec.seed);
    Rng dropout_rng = shuffle_rng.child(0x6d61736b); // "mask"
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t(0));

    std::map<std::string, Tensor<T>> velocity;
    for (const auto& [name, tensor] : det.params()) {
        velocity[name] = Tensor<T>(tensor.shape());
        velocity[name].fill(T(0));
    }

    NceTrainLog log;
    std::map<std::string, Tensor<T>> best_params = det.params();
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += spec.batch) {
            const std::size_t stop = std::min(order.size(), start + spec.batch);
            const std::size_t B = stop - start;

            Tensor<T> const_part({B * S, width});
            std::vector<std::vector<int>> label_idx(taps, std::vector<int>(B * S, 0));
            Tensor<T> mask({B * S, D});
            std::vector<T> targets(B), weights(B);
            std::vector<int> cls_rows(B);
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t row = order[start + b];
                const NeighborContext& ctx = train.contexts[row];
                require(ctx.taps.size() == taps, "train_detector: context tap mismatch");
                const Tensor<T> part = const_part_for(ctx);
                std::copy(part.data(), part.data() + part.numel(), const_part.row(b * S));
                for (std::size_t s = 0; s < S; ++s) {
                    T* mrow = mask.row(b * S + s);
                    std::fill(mrow, mrow + D, s == 0 ? T(0) : T(1));
                    for (std::size_t ti = 0; ti < taps; ++ti)
                        label_idx[ti][b * S + s] = s == 0 ? 0 : ctx.taps[ti].labels[s - 1];
                }
                targets[b] = train.labels[row] ? T(1) : T(0);
                weights[b] = train.labels[row] ? w_pos : w_neg;
                cls_rows[b] = static_cast<int>(b * S);
            }

            Tape<T> tape;
            std::map<std::string, typename Tape<T>::Var> pv;
            for (const auto& [name, tensor] : det.params())
                pv[name] = tape.leaf(tensor, true, name);

            const auto mask_var = tape.constant(mask);
            std::vector<typename Tape<T>::Var> parts;
            for (std::size_t ti = 0; ti < taps; ++ti)
                parts.push_back(tape.mul(
                    tape.gather_rows(pv.at("emb" + std::to_string(ti)), label_idx[ti]), mask_var));
            const auto label_part = parts.size() == 1 ? parts[0] : tape.concat_cols(parts);
            const auto tokens = tape.add(label_part, tape.constant(const_part));

            const auto z = det.encode(tape, pv, tokens, B, S, cfg.dropout > 0, &dropout_rng);
            const auto z_cls = tape.gather_rows(z, cls_rows);
            const auto loss = tape.bce_logits(z_cls, targets, weights, /*mean=*/true);
            const double loss_value = static_cast<double>(tape.value(loss)[0]);
            if (!std::isfinite(loss_value))
                throw TrainingError("detector training diverged at epoch " +
                                    std::to_string(epoch));
            epoch_loss += loss_value;
            ++batches;
            tape.backward(loss);

            for (auto& [name, tensor] : det.params()) {
                const Tensor<T>& g = tape.grad(pv.at(name));
                Tensor<T>& vel = velocity[name];
                for (std::size_t i = 0; i < tensor.numel(); ++i) {
                    vel[i] = static_cast<T>(spec.momentum * vel[i] - spec.learning_rate * g[i]);
                    tensor[i] += vel[i];
                }
            }
        }
        log.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));

        const std::vector<double> scores = det.score_batch(val.contexts);
        std::vector<double> neg, pos;
        for (std::size_t i = 0; i < val.size(); ++i)
            (val.labels[i] ? pos : neg).push_back(scores[i]);
        const double va = auroc(neg, pos);
        log.val_auroc.push_back(va);
        if (va > log.best_val_auroc || log.best_epoch < 0) {
            log.best_val_auroc = va;
            log.best_epoch = epoch;
            best_params = det.params();
        }
    }
    det.params() = best_params;
    det.set_validation_auroc(log.best_val_auroc);
    return log;
}

/// Full scoring pipeline for raw inputs: features -> retrieval ->
/// tokens -> encoder, returning the CLS probability per row.
template <typename T>
std::vector<double> detect_scores(const NceDetector<T>& det, const TargetModel<T>& model,
                                  const QueryLibrary<T>& lib, const Tensor<T>& inputs) {
    require(det.taps() == lib.taps, "detect: detector/library tap mismatch");
    const auto ctxs =
        retrieve_contexts(lib, model, inputs, static_cast<std::size_t>(det.config().k));
    return det.score_batch(ctxs);
}

template <typename T>
double detect_score(const NceDetector<T>& det, const TargetModel<T>& model,
                    const QueryLibrary<T>& lib, const Tensor<T>& input_row) {
    require(input_row.rank() == 2 && input_row.rows() == 1, "detect: expected a single row");
    return detect_scores(det, model, lib, input_row)[0];
}

inline constexpr int kDetectorSchemaVersion = 1;

template <typename T>
void save_detector(const std::string& path, const NceDetector<T>& det) {
    NamedTensors archive;
    for (const auto& [name, tensor] : det.params()) archive.add(name, tensor);
    save_archive(path, archive);

    nlohmann::ordered_json meta;
    meta["schema_version"] = kDetectorSchemaVersion;
    nlohmann::ordered_json cfg;
    to_json(cfg, det.config());
    meta["config"] = cfg;
    meta["taps"] = det.taps();
    meta["classes"] = det.classes();
    meta["seed"] = det.seed();
    meta["validation_auroc"] = det.validation_auroc();
    std::ofstream os(path + ".json");
    if (!os) throw FormatError("cannot write detector sidecar \"" + path + ".json\"");
    os << meta.dump(2) << "\n";
}

template <typename T = float>
NceDetector<T> load_detector(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw FormatError("missing detector sidecar \"" + path + ".json\"");
    nlohmann::json meta = nlohmann::json::parse(is);
    const int version = meta.value("schema_version", -1);
    if (version != kDetectorSchemaVersion)
        throw FormatError("detector schema version mismatch: expected " +
                          std::to_string(kDetectorSchemaVersion) + ", found " +
                          std::to_string(version));

    NceConfig cfg;
    from_json(meta.at("config"), cfg);
    NceDetector<T> det(cfg, meta.at("taps").get<std::vector<int>>(), meta.at("classes").get<int>(),
                       meta.at("seed").get<std::uint64_t>());
    det.set_validation_auroc(meta.value("validation_auroc", 0.0));
    const NamedTensors archive = load_archive(path);
    for (auto& [name, tensor] : det.params()) {
        const Tensor<T>& loaded = archive.get<T>(name);
        require(loaded.shape() == tensor.shape(), "detector checkpoint: shape mismatch for " + name);
        tensor = loaded;
    }
    return det;
}

} // namespace asds
