#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/attacks.hpp"
#include "asds/baselines.hpp"
#include "asds/dataset.hpp"
#include "asds/eval.hpp"
#include "asds/nce.hpp"
#include "asds/query_library.hpp"
#include "asds/target_model.hpp"

namespace asds {

/// Everything a full run needs, JSON round-trippable. Seeds are explicit
/// and all derived seeds are fixed offsets of `seed`, so a config
/// snapshot reproduces a run bit for bit.
struct ExperimentConfig {
    // dataset
    std::string family = "gaussian_mixture";
    std::size_t dims = 20;
    int classes = 5;
    std::size_t n = 6000;
    double separation = 10.0;

    // splits (target / detector-train / detector-eval)
    double target_fraction = 0.5;
    double detector_train_fraction = 0.25;
    double detector_eval_fraction = 0.25;

    // target model
    std::vector<std::size_t> hidden = {64, 64};
    std::string activation = "relu";
    TargetTrainSpec target_train;

    // feature taps + library
    std::vector<int> taps = {1, 2, 3};
    bool normalize_library = false;

    // attacks by kind
    std::vector<AttackConfig> attacks;

    // detector
    NceConfig nce;
    NceTrainSpec nce_train;
    double detector_val_fraction = 0.2; // held out of detector-train for checkpointing

    std::uint64_t seed = 42;
    std::string out_dir = "out";

    // derived seeds, one fixed offset each
    std::uint64_t split_seed() const { return seed + 1; }
    std::uint64_t target_seed() const { return seed + 2; }
    std::uint64_t noise_train_seed() const { return seed + 3; }
    std::uint64_t noise_eval_seed() const { return seed + 4; }
    std::uint64_t detector_split_seed() const { return seed + 5; }
    std::uint64_t nce_init_seed() const { return seed + 6; }

    void check() const {
        require(classes >= 2 && dims >= 2 && n >= static_cast<std::size_t>(classes),
                "config: bad dataset shape");
        require(!taps.empty(), "config: need at least one tap");
        require(detector_val_fraction > 0 && detector_val_fraction < 1,
                "config: detector_val_fraction must be in (0, 1)");
        nce.check();
        for (const auto& a : attacks) a.check();
    }

    const AttackConfig* find_attack(const std::string& kind) const {
        for (const auto& a : attacks)
            if (a.kind == kind) return &a;
        return nullptr;
    }
};

inline constexpr int kConfigSchemaVersion = 1;

inline void to_json(nlohmann::ordered_json& j, const ExperimentConfig& c) {
    j["schema_version"] = kConfigSchemaVersion;
    j["dataset"] = {{"family", c.family},   {"dims", c.dims},
                    {"classes", c.classes}, {"n", c.n},
                    {"separation", c.separation}};
    j["splits"] = {{"target", c.target_fraction},
                   {"detector_train", c.detector_train_fraction},
                   {"detector_eval", c.detector_eval_fraction}};
    j["target"] = {{"hidden", c.hidden},
                   {"activation", c.activation},
                   {"epochs", c.target_train.epochs},
                   {"batch", c.target_train.batch},
                   {"learning_rate", c.target_train.learning_rate},
                   {"momentum", c.target_train.momentum},
                   {"weight_decay", c.target_train.weight_decay}};
    j["library"] = {{"taps", c.taps}, {"normalize", c.normalize_library}};
    j["attacks"] = nlohmann::ordered_json::array();
    for (const auto& a : c.attacks) {
        nlohmann::ordered_json ja;
        to_json(ja, a);
        j["attacks"].push_back(ja);
    }
    nlohmann::ordered_json jn;
    to_json(jn, c.nce);
    j["nce"] = jn;
    j["nce_train"] = {{"epochs", c.nce_train.epochs},
                      {"batch", c.nce_train.batch},
                      {"learning_rate", c.nce_train.learning_rate},
                      {"momentum", c.nce_train.momentum},
                      {"seed", c.nce_train.seed}};
    j["detector_val_fraction"] = c.detector_val_fraction;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    const int version = j.value("schema_version", -1);
    if (version != kConfigSchemaVersion)
        throw FormatError("config schema version mismatch: expected " +
                          std::to_string(kConfigSchemaVersion) + ", found " +
                          std::to_string(version));
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        c.family = d.value("family", c.family);
        c.dims = d.value("dims", c.dims);
        c.classes = d.value("classes", c.classes);
        c.n = d.value("n", c.n);
        c.separation = d.value("separation", c.separation);
    }
    if (j.contains("splits")) {
        const auto& s = j.at("splits");
        c.target_fraction = s.value("target", c.target_fraction);
        c.detector_train_fraction = s.value("detector_train", c.detector_train_fraction);
        c.detector_eval_fraction = s.value("detector_eval", c.detector_eval_fraction);
    }
    if (j.contains("target")) {
        const auto& t = j.at("target");
        c.hidden = t.value("hidden", c.hidden);
        c.activation = t.value("activation", c.activation);
        c.target_train.epochs = t.value("epochs", c.target_train.epochs);
        c.target_train.batch = t.value("batch", c.target_train.batch);
        c.target_train.learning_rate = t.value("learning_rate", c.target_train.learning_rate);
        c.target_train.momentum = t.value("momentum", c.target_train.momentum);
        c.target_train.weight_decay = t.value("weight_decay", c.target_train.weight_decay);
    }
    if (j.contains("library")) {
        c.taps = j.at("library").value("taps", c.taps);
        c.normalize_library = j.at("library").value("normalize", c.normalize_library);
    }
    if (j.contains("attacks")) {
        c.attacks.clear();
        for (const auto& ja : j.at("attacks")) {
            AttackConfig a;
            from_json(ja, a);
            c.attacks.push_back(a);
        }
    }
    if (j.contains("nce")) from_json(j.at("nce"), c.nce);
    if (j.contains("nce_train")) {
        const auto& t = j.at("nce_train");
        c.nce_train.epochs = t.value("epochs", c.nce_train.epochs);
        c.nce_train.batch = t.value("batch", c.nce_train.batch);
        c.nce_train.learning_rate = t.value("learning_rate", c.nce_train.learning_rate);
        c.nce_train.momentum = t.value("momentum", c.nce_train.momentum);
        c.nce_train.seed = t.value("seed", c.nce_train.seed);
    }
    c.detector_val_fraction = j.value("detector_val_fraction", c.detector_val_fraction);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
}

/// The frozen default benchmark: 20-D, 5-class gaussian mixture with
/// FGSM/BIM/adaptive attacks at matched budgets (noise sigma follows
/// epsilon).  Separation and epsilon are calibrated together so that a
/// gradient-aligned L-inf step of epsilon crosses the inter-class
/// half-gap into the sparse boundary shell, while isotropic noise of
/// the same magnitude stays inside its cluster; BIM's total step
/// budget (alpha * iters = 0.85 epsilon) lands it in the same shell
/// instead of deep inside the neighboring class.
inline ExperimentConfig default_config() {
    ExperimentConfig c;
    c.target_train.seed = c.target_seed();
    c.nce_train.seed = c.seed + 7;

    AttackConfig fgsm;
    fgsm.kind = "fgsm";
    fgsm.epsilon = 2.2;
    fgsm.seed = c.seed + 10;
    AttackConfig bim;
    bim.kind = "bim";
    bim.epsilon = 2.2;
    bim.alpha = 0.23375; // 0.85 of the ball over 8 steps
    bim.iters = 8;
    bim.seed = c.seed + 11;
    AttackConfig adaptive;
    adaptive.kind = "adaptive";
    adaptive.epsilon = 2.2;
    adaptive.alpha = 0.1375; // epsilon / 16
    adaptive.iters = 40;
    adaptive.seed = c.seed + 12;
    c.attacks = {fgsm, bim, adaptive};
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config \"" + path + "\"");
    ExperimentConfig c = default_config();
    from_json(nlohmann::json::parse(is), c);
    c.check();
    return c;
}

inline void save_config(const std::string& path, const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    to_json(j, c);
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write config \"" + path + "\"");
    os << j.dump(2) << "\n";
}

/// Shared state for every scenario: data splits, the trained target,
/// and the query library built from the target-train clean samples (the
/// model's own training images). Detector-train and detector-eval
/// queries are therefore both out-of-bank, so their retrieval contexts
/// are identically distributed and no query self-matches at distance 0.
template <typename T>
struct Benchmark {
    ExperimentConfig cfg;
    LabeledDataset<T> target_split, det_train_split, det_eval_split;
    TargetModel<T> model;
    QueryLibrary<T> library;
    double target_accuracy = 0; // on the detector-eval split
};

template <typename T = float>
Benchmark<T> build_benchmark(const ExperimentConfig& cfg) {
    cfg.check();
    Benchmark<T> bench;
    bench.cfg = cfg;

    const LabeledDataset<T> full = generate<T>(family_from(cfg.family), cfg.dims, cfg.classes,
                                               cfg.n, cfg.seed, cfg.separation);
    SplitSpec split_spec;
    split_spec.target_fraction = cfg.target_fraction;
    split_spec.detector_train_fraction = cfg.detector_train_fraction;
    split_spec.detector_eval_fraction = cfg.detector_eval_fraction;
    split_spec.seed = cfg.split_seed();
    const Splits splits = make_splits(full.size(), split_spec);
    bench.target_split = subset(full, splits.target_train);
    bench.det_train_split = subset(full, splits.detector_train);
    bench.det_eval_split = subset(full, splits.detector_eval);

    bench.model = TargetModel<T>(cfg.dims, cfg.classes, cfg.hidden,
                                 activation_from(cfg.activation), cfg.target_seed());
    TargetTrainSpec tspec = cfg.target_train;
    tspec.seed = cfg.target_seed();
    train_target(bench.model, bench.target_split, tspec);
    bench.target_accuracy =
        bench.model.accuracy(bench.det_eval_split.inputs, bench.det_eval_split.labels);

    bench.library =
        build_library(bench.model, bench.target_split, cfg.taps, cfg.normalize_library);
    return bench;
}

/// Keep the k nearest entries of a context retrieved at a larger k.
/// Descending order means those are the trailing entries; the result is
/// identical to retrieving at the smaller k directly.
inline NeighborContext truncate_context(const NeighborContext& ctx, std::size_t k) {
    NeighborContext out;
    for (const auto& tap : ctx.taps) {
        require(tap.indices.size() >= k, "truncate_context: k exceeds stored neighbors");
        TapNeighbors t;
        const std::size_t skip = tap.indices.size() - k;
        t.indices.assign(tap.indices.begin() + skip, tap.indices.end());
        t.distances.assign(tap.distances.begin() + skip, tap.distances.end());
        t.labels.assign(tap.labels.begin() + skip, tap.labels.end());
        out.taps.push_back(std::move(t));
    }
    return out;
}

inline std::vector<NeighborContext> truncate_contexts(const std::vector<NeighborContext>& ctxs,
                                                      std::size_t k) {
    std::vector<NeighborContext> out;
    out.reserve(ctxs.size());
    for (const auto& c : ctxs) out.push_back(truncate_context(c, k));
    return out;
}

/// Per-attack detection material on both detector splits: contexts for
/// the context-based detectors and per-tap features for MDA, with only
/// successful adversarial rows kept.
template <typename T>
struct ScenarioData {
    AttackConfig attack;
    std::size_t retrieval_k = 0;

    std::vector<NeighborContext> ctx_train_clean, ctx_train_noisy, ctx_train_adv;
    std::vector<NeighborContext> ctx_eval_clean, ctx_eval_noisy, ctx_eval_adv;
    std::vector<Tensor<T>> feat_train_clean, feat_train_noisy, feat_train_adv;
    std::vector<Tensor<T>> feat_eval_clean, feat_eval_noisy, feat_eval_adv;

    double attack_success_train = 0, attack_success_eval = 0;
};

namespace detail {

template <typename T>
Tensor<T> keep_rows(const Tensor<T>& m, const std::vector<char>& keep) {
    std::size_t count = 0;
    for (char c : keep) count += c != 0;
    require(count > 0, "keep_rows: no rows kept");
    Tensor<T> out({count, m.cols()});
    std::size_t w = 0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (keep[i]) {
            std::copy(m.row(i), m.row(i) + m.cols(), out.row(w));
            ++w;
        }
    return out;
}

} // namespace detail

/// Generates the six context/feature sets for one attack. The surrogate
/// model, if given, supplies the attack gradients (transfer setting);
/// contexts and features always come from the benchmark's own target.
template <typename T>
ScenarioData<T> make_scenario_data(const Benchmark<T>& bench, const AttackConfig& attack,
                                   std::size_t retrieval_k,
                                   const TargetModel<T>* surrogate = nullptr) {
    const TargetModel<T>& attack_model = surrogate ? *surrogate : bench.model;
    const auto& lo = bench.det_train_split.valid_lo;
    const auto& hi = bench.det_train_split.valid_hi;
    ScenarioData<T> data;
    data.attack = attack;
    data.retrieval_k = retrieval_k;

    const auto build_side = [&](const LabeledDataset<T>& split, std::uint64_t noise_seed,
                                std::vector<NeighborContext>& ctx_clean,
                                std::vector<NeighborContext>& ctx_noisy,
                                std::vector<NeighborContext>& ctx_adv,
                                std::vector<Tensor<T>>& feat_clean,
                                std::vector<Tensor<T>>& feat_noisy,
                                std::vector<Tensor<T>>& feat_adv, double& success_rate) {
        const Tensor<T> noisy =
            gen_noisy(split.inputs, lo, hi, attack.noise_sigma(), noise_seed);
        AttackConfig acfg = attack;
        acfg.seed = attack.seed + noise_seed; // distinct stream per split
        const AttackResult<T> adv =
            run_attack(attack_model, acfg, split.inputs, split.labels, lo, hi, &bench.library);
        success_rate = adv.success_rate();
        require(success_rate > 0, "scenario: attack produced no successful adversarials");
        const Tensor<T> adv_kept = detail::keep_rows(adv.adversarial, adv.success);

        ctx_clean = retrieve_contexts(bench.library, bench.model, split.inputs, retrieval_k);
        ctx_noisy = retrieve_contexts(bench.library, bench.model, noisy, retrieval_k);
        ctx_adv = retrieve_contexts(bench.library, bench.model, adv_kept, retrieval_k);
        feat_clean = bench.model.extract_features(split.inputs, bench.cfg.taps);
        feat_noisy = bench.model.extract_features(noisy, bench.cfg.taps);
        feat_adv = bench.model.extract_features(adv_kept, bench.cfg.taps);
    };

    build_side(bench.det_train_split, bench.cfg.noise_train_seed(), data.ctx_train_clean,
               data.ctx_train_noisy, data.ctx_train_adv, data.feat_train_clean,
               data.feat_train_noisy, data.feat_train_adv, data.attack_success_train);
    build_side(bench.det_eval_split, bench.cfg.noise_eval_seed(), data.ctx_eval_clean,
               data.ctx_eval_noisy, data.ctx_eval_adv, data.feat_eval_clean, data.feat_eval_noisy,
               data.feat_eval_adv, data.attack_success_eval);
    return data;
}

/// The trained detector family for one training attack: the NCE plus
/// raw and logistic-combined baselines and the MDA model.
template <typename T>
struct DetectorSuite {
    NceDetector<T> nce;
    NceTrainLog nce_log;
    MdaModel mda;
    LogisticCombiner lid_combiner;
    LogisticCombiner mda_combiner;

    // clean+noisy validation scores per detector, for thresholds
    std::vector<double> val_neg_nce, val_neg_lid, val_neg_lid_logistic, val_neg_mda,
        val_neg_mda_logistic;
};

namespace detail {

/// Deterministic stratified split of indices into train/validation.
inline void stratified_split(const std::vector<char>& labels, double val_fraction,
                             std::uint64_t seed, std::vector<std::size_t>& train_idx,
                             std::vector<std::size_t>& val_idx) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    const auto cut = [&](std::vector<std::size_t>& v) {
        const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        val_fraction * double(v.size())));
        for (std::size_t i = 0; i < v.size(); ++i)
            (i < n_val ? val_idx : train_idx).push_back(v[i]);
    };
    cut(pos);
    cut(neg);
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

template <typename T>
std::vector<Tensor<T>> concat_feature_sets(const std::vector<const std::vector<Tensor<T>>*>& sets) {
    const std::size_t taps = sets[0]->size();
    std::vector<Tensor<T>> out;
    for (std::size_t t = 0; t < taps; ++t) {
        std::size_t rows = 0;
        for (const auto* s : sets) rows += (*s)[t].rows();
        Tensor<T> m({rows, (*sets[0])[t].cols()});
        std::size_t w = 0;
        for (const auto* s : sets) {
            const Tensor<T>& f = (*s)[t];
            std::copy(f.data(), f.data() + f.numel(), m.row(w));
            w += f.rows();
        }
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace detail

/// Trains the full detector suite for one scenario's training material.
/// All randomness is derived from the config seeds; identical inputs
/// give identical suites.
template <typename T>
DetectorSuite<T> train_detector_suite(const Benchmark<T>& bench, const ScenarioData<T>& data,
                                      const NceConfig& nce_cfg) {
    DetectorSuite<T> suite;

    // -- assemble the detection dataset and its train/val split --
    DetectionDataset all;
    all.append(data.ctx_train_clean, 0);
    all.append(data.ctx_train_noisy, 0);
    all.append(data.ctx_train_adv, 1);
    std::vector<std::size_t> train_idx, val_idx;
    detail::stratified_split(all.labels, bench.cfg.detector_val_fraction,
                             bench.cfg.detector_split_seed(), train_idx, val_idx);
    DetectionDataset train_ds, val_ds;
    for (std::size_t i : train_idx) {
        train_ds.contexts.push_back(all.contexts[i]);
        train_ds.labels.push_back(all.labels[i]);
    }
    for (std::size_t i : val_idx) {
        val_ds.contexts.push_back(all.contexts[i]);
        val_ds.labels.push_back(all.labels[i]);
    }

    // -- NCE --
    suite.nce = NceDetector<T>(nce_cfg, bench.cfg.taps, bench.cfg.classes,
                               bench.cfg.nce_init_seed());
    suite.nce_log = train_detector(suite.nce, train_ds, val_ds, bench.cfg.nce_train);

    // -- MDA from clean detector-train features with true labels --
    suite.mda = mda_fit(data.feat_train_clean, bench.det_train_split.labels, bench.cfg.classes,
                        bench.cfg.taps);

    // -- logistic combiners over per-tap scores --
    DetectionDataset lid_train;
    lid_train.append(data.ctx_train_clean, 0);
    lid_train.append(data.ctx_train_noisy, 0);
    lid_train.append(data.ctx_train_adv, 1);
    suite.lid_combiner.fit(lid_feature_matrix(lid_train.contexts), lid_train.labels);

    const auto mda_features = detail::concat_feature_sets<T>(
        {&data.feat_train_clean, &data.feat_train_noisy, &data.feat_train_adv});
    std::vector<char> mda_labels(data.feat_train_clean[0].rows(), 0);
    mda_labels.insert(mda_labels.end(), data.feat_train_noisy[0].rows(), 0);
    mda_labels.insert(mda_labels.end(), data.feat_train_adv[0].rows(), 1);
    suite.mda_combiner.fit(mda_tap_scores(suite.mda, mda_features), mda_labels);

    // -- validation negatives for white-box thresholds --
    std::vector<NeighborContext> val_neg_ctx;
    std::vector<std::size_t> val_neg_rows; // rows into the concatenated train sets
    for (std::size_t i : val_idx)
        if (!all.labels[i]) {
            val_neg_ctx.push_back(all.contexts[i]);
            val_neg_rows.push_back(i);
        }
    suite.val_neg_nce = suite.nce.score_batch(val_neg_ctx);
    const Tensor<double> lid_feats = lid_feature_matrix(val_neg_ctx);
    suite.val_neg_lid_logistic = suite.lid_combiner.score_rows(lid_feats);
    for (const auto& ctx : val_neg_ctx) suite.val_neg_lid.push_back(lid_context_score(ctx));

    // negatives all live in the clean/noisy blocks of the concatenation
    const auto clean_noisy =
        detail::concat_feature_sets<T>({&data.feat_train_clean, &data.feat_train_noisy});
    std::vector<Tensor<T>> val_neg_feats;
    for (std::size_t t = 0; t < clean_noisy.size(); ++t) {
        Tensor<T> m({val_neg_rows.size(), clean_noisy[t].cols()});
        for (std::size_t i = 0; i < val_neg_rows.size(); ++i)
            std::copy(clean_noisy[t].row(val_neg_rows[i]),
                      clean_noisy[t].row(val_neg_rows[i]) + clean_noisy[t].cols(), m.row(i));
        val_neg_feats.push_back(std::move(m));
    }
    suite.val_neg_mda = mda_scores(suite.mda, val_neg_feats);
    suite.val_neg_mda_logistic =
        suite.mda_combiner.score_rows(mda_tap_scores(suite.mda, val_neg_feats));
    return suite;
}

/// One report line; fooling_rate is negative when not applicable.
struct EvalRow {
    std::string scenario;
    std::string train_attack;
    std::string test_attack;
    std::string detector;
    int k = 0;
    int D = 0;
    double auroc_percent = 0;
    double auroc_clean_only_percent = 0;
    std::size_t n_positive = 0, n_clean = 0, n_noisy = 0;
    double fooling_rate = -1;

    std::size_t n_negative() const { return n_clean + n_noisy; }
};

struct EvalReport {
    std::vector<EvalRow> rows;
    nlohmann::ordered_json config_snapshot;
};

namespace detail {

inline EvalRow score_row(const std::string& scenario, const std::string& train_attack,
                         const std::string& test_attack, const std::string& detector, int k, int D,
                         const std::vector<double>& clean, const std::vector<double>& noisy,
                         const std::vector<double>& adv) {
    EvalRow row;
    row.scenario = scenario;
    row.train_attack = train_attack;
    row.test_attack = test_attack;
    row.detector = detector;
    row.k = k;
    row.D = D;
    std::vector<double> negatives = clean;
    negatives.insert(negatives.end(), noisy.begin(), noisy.end());
    row.auroc_percent = 100.0 * auroc(negatives, adv);
    row.auroc_clean_only_percent = 100.0 * auroc(clean, adv);
    row.n_positive = adv.size();
    row.n_clean = clean.size();
    row.n_noisy = noisy.size();
    return row;
}

} // namespace detail

/// Scores all five detectors on one scenario's evaluation sets and
/// emits one row per detector.
template <typename T>
std::vector<EvalRow> evaluate_suite(const DetectorSuite<T>& suite,
                                    const ScenarioData<T>& eval_data, const std::string& scenario,
                                    const std::string& train_attack,
                                    const std::string& test_attack) {
    const int k = suite.nce.config().k;
    const int D = suite.nce.config().D;
    std::vector<EvalRow> rows;

    const auto nce_clean = suite.nce.score_batch(eval_data.ctx_eval_clean);
    const auto nce_noisy = suite.nce.score_batch(eval_data.ctx_eval_noisy);
    const auto nce_adv = suite.nce.score_batch(eval_data.ctx_eval_adv);
    rows.push_back(detail::score_row(scenario, train_attack, test_attack, "nce", k, D, nce_clean,
                                     nce_noisy, nce_adv));

    const auto lid_of = [](const std::vector<NeighborContext>& ctxs) {
        std::vector<double> out;
        out.reserve(ctxs.size());
        for (const auto& c : ctxs) out.push_back(lid_context_score(c));
        return out;
    };
    rows.push_back(detail::score_row(scenario, train_attack, test_attack, "lid", k, D,
                                     lid_of(eval_data.ctx_eval_clean),
                                     lid_of(eval_data.ctx_eval_noisy),
                                     lid_of(eval_data.ctx_eval_adv)));
    rows.push_back(detail::score_row(
        scenario, train_attack, test_attack, "lid_logistic", k, D,
        suite.lid_combiner.score_rows(lid_feature_matrix(eval_data.ctx_eval_clean)),
        suite.lid_combiner.score_rows(lid_feature_matrix(eval_data.ctx_eval_noisy)),
        suite.lid_combiner.score_rows(lid_feature_matrix(eval_data.ctx_eval_adv))));

    rows.push_back(detail::score_row(scenario, train_attack, test_attack, "mda", k, D,
                                     mda_scores(suite.mda, eval_data.feat_eval_clean),
                                     mda_scores(suite.mda, eval_data.feat_eval_noisy),
                                     mda_scores(suite.mda, eval_data.feat_eval_adv)));
    rows.push_back(detail::score_row(
        scenario, train_attack, test_attack, "mda_logistic", k, D,
        suite.mda_combiner.score_rows(mda_tap_scores(suite.mda, eval_data.feat_eval_clean)),
        suite.mda_combiner.score_rows(mda_tap_scores(suite.mda, eval_data.feat_eval_noisy)),
        suite.mda_combiner.score_rows(mda_tap_scores(suite.mda, eval_data.feat_eval_adv))));
    return rows;
}

/// Attack-aware protocol: train the suite on an attack, evaluate on the
/// same attack's held-out material.
template <typename T>
std::vector<EvalRow> run_attack_aware(const ScenarioData<T>& data, const DetectorSuite<T>& suite) {
    return evaluate_suite(suite, data, "attack_aware", data.attack.kind, data.attack.kind);
}

/// Attack-unaware (transfer) protocol: detectors trained on one attack,
/// evaluated on another attack's material.
template <typename T>
std::vector<EvalRow> run_attack_unaware(const DetectorSuite<T>& trained_on,
                                        const std::string& train_attack,
                                        const ScenarioData<T>& test_data) {
    return evaluate_suite(trained_on, test_data, "attack_unaware", train_attack,
                          test_data.attack.kind);
}

/// White-box protocol: the adaptive attack against the detector's own
/// retrieval bank, with fooling rates at 5% FPR thresholds set on the
/// clean+noisy validation scores.
inline constexpr double kWhiteboxFpr = 0.05;

template <typename T>
std::vector<EvalRow> run_whitebox(const DetectorSuite<T>& suite, const std::string& train_attack,
                                  const ScenarioData<T>& adaptive_data) {
    std::vector<EvalRow> rows = evaluate_suite(suite, adaptive_data, "whitebox", train_attack,
                                               adaptive_data.attack.kind);

    const auto fool = [&](const std::vector<double>& val_neg, const std::vector<double>& adv) {
        return fooling_rate(adv, threshold_at_fpr(val_neg, kWhiteboxFpr));
    };
    for (auto& row : rows) {
        if (row.detector == "nce")
            row.fooling_rate =
                fool(suite.val_neg_nce, suite.nce.score_batch(adaptive_data.ctx_eval_adv));
        else if (row.detector == "lid") {
            std::vector<double> adv;
            for (const auto& c : adaptive_data.ctx_eval_adv) adv.push_back(lid_context_score(c));
            row.fooling_rate = fool(suite.val_neg_lid, adv);
        } else if (row.detector == "lid_logistic")
            row.fooling_rate =
                fool(suite.val_neg_lid_logistic,
                     suite.lid_combiner.score_rows(lid_feature_matrix(adaptive_data.ctx_eval_adv)));
        else if (row.detector == "mda")
            row.fooling_rate =
                fool(suite.val_neg_mda, mda_scores(suite.mda, adaptive_data.feat_eval_adv));
        else if (row.detector == "mda_logistic")
            row.fooling_rate = fool(
                suite.val_neg_mda_logistic,
                suite.mda_combiner.score_rows(mda_tap_scores(suite.mda,
                                                             adaptive_data.feat_eval_adv)));
    }
    return rows;
}

/// k x D ablation on one attack. Contexts are retrieved once at max k
/// and truncated per grid point (identical to direct retrieval); grid
/// points with k above the library size are skipped with a reason.
template <typename T>
std::vector<EvalRow> ablation_sweep(const Benchmark<T>& bench, const AttackConfig& attack,
                                    const std::vector<int>& ks, const std::vector<int>& Ds,
                                    std::vector<std::string>* skipped = nullptr) {
    require(!ks.empty() && !Ds.empty(), "ablation: empty grid");
    std::vector<int> usable;
    for (int k : ks) {
        if (static_cast<std::size_t>(k) > bench.library.size()) {
            if (skipped)
                skipped->push_back("k=" + std::to_string(k) + " exceeds library size " +
                                   std::to_string(bench.library.size()));
            continue;
        }
        usable.push_back(k);
    }
    require(!usable.empty(), "ablation: no usable k values");
    const int k_max = *std::max_element(usable.begin(), usable.end());

    const ScenarioData<T> full =
        make_scenario_data(bench, attack, static_cast<std::size_t>(k_max));
    std::vector<EvalRow> rows;
    for (int k : usable) {
        ScenarioData<T> at_k = full;
        const auto kk = static_cast<std::size_t>(k);
        at_k.retrieval_k = kk;
        for (auto* ctxs : {&at_k.ctx_train_clean, &at_k.ctx_train_noisy, &at_k.ctx_train_adv,
                           &at_k.ctx_eval_clean, &at_k.ctx_eval_noisy, &at_k.ctx_eval_adv})
            *ctxs = truncate_contexts(*ctxs, kk);
        for (int D : Ds) {
            NceConfig cfg = bench.cfg.nce;
            cfg.k = k;
            cfg.D = D;
            const DetectorSuite<T> suite = train_detector_suite(bench, at_k, cfg);
            std::vector<EvalRow> cell =
                evaluate_suite(suite, at_k, "ablation", attack.kind, attack.kind);
            for (auto& row : cell)
                if (row.detector == "nce") rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace detail

/// Flat CSV for plotting; field order is part of the format contract.
inline void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write report \"" + path + "\"");
    os << "scenario,train_attack,test_attack,detector,k,D,auroc,fooling_rate\n";
    for (const auto& r : rows) {
        os << r.scenario << ',' << r.train_attack << ',' << r.test_attack << ',' << r.detector
           << ',' << r.k << ',' << r.D << ',' << detail::fixed6(r.auroc_percent) << ',';
        if (r.fooling_rate >= 0) os << detail::fixed6(r.fooling_rate);
        os << '\n';
    }
}

inline void write_report_json(const std::string& path, const EvalReport& report) {
    nlohmann::ordered_json j;
    j["config"] = report.config_snapshot;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["scenario"] = r.scenario;
        row["train_attack"] = r.train_attack;
        row["test_attack"] = r.test_attack;
        row["detector"] = r.detector;
        row["k"] = r.k;
        row["D"] = r.D;
        row["auroc_percent"] = r.auroc_percent;
        row["auroc_clean_only_percent"] = r.auroc_clean_only_percent;
        row["n_positive"] = r.n_positive;
        row["n_negative"] = r.n_negative();
        row["n_clean"] = r.n_clean;
        row["n_noisy"] = r.n_noisy;
        if (r.fooling_rate >= 0) row["fooling_rate"] = r.fooling_rate;
        j["rows"].push_back(row);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write report \"" + path + "\"");
    os << j.dump(2) << "\n";
}

} // namespace asds
