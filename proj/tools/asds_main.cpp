// Command-line frontend for the adversarial-subspace detection toolkit.
// Every subcommand writes its artifacts plus a resolved-config snapshot
// into --out, so a finished directory is self-describing.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "asds/attacks.hpp"
#include "asds/baselines.hpp"
#include "asds/dataset.hpp"
#include "asds/experiment.hpp"
#include "asds/idx.hpp"
#include "asds/nce.hpp"
#include "asds/query_library.hpp"
#include "asds/target_model.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_snapshot(const std::string& out_dir, const ordered_json& resolved) {
    std::ofstream os(out_dir + "/run-config.json");
    if (!os) throw asds::FormatError("cannot write snapshot in \"" + out_dir + "\"");
    os << resolved.dump(2) << "\n";
}

std::string prepare_out(const std::string& out_dir) {
    fs::create_directories(out_dir);
    return out_dir;
}

void require_file(const std::string& path) {
    if (!fs::exists(path))
        throw asds::FormatError("missing artifact: expected \"" + path + "\"");
}

asds::ExperimentConfig resolve_config(const std::string& config_path, std::uint64_t seed_override,
                                      int k_override, int d_override) {
    asds::ExperimentConfig cfg =
        config_path.empty() ? asds::default_config() : asds::load_config(config_path);
    if (seed_override != 0) cfg.seed = seed_override;
    if (k_override > 0) cfg.nce.k = k_override;
    if (d_override > 0) cfg.nce.D = d_override;
    cfg.check();
    return cfg;
}

ordered_json config_snapshot(const asds::ExperimentConfig& cfg) {
    ordered_json j;
    to_json(j, cfg);
    return j;
}

int cmd_gen_data(const std::string& family, std::size_t dims, int classes, std::size_t n,
                 double separation, std::uint64_t seed, const std::string& out_dir) {
    prepare_out(out_dir);
    const auto ds =
        asds::generate<float>(asds::family_from(family), dims, classes, n, seed, separation);
    asds::save_dataset(out_dir + "/dataset.bin", ds);
    write_snapshot(out_dir, ordered_json{{"command", "gen-data"},
                                         {"family", family},
                                         {"dims", dims},
                                         {"classes", classes},
                                         {"n", n},
                                         {"separation", separation},
                                         {"seed", seed}});
    std::cout << "wrote " << out_dir << "/dataset.bin (" << n << " x " << dims << ")\n";
    return 0;
}

int cmd_train_target(const std::string& data_path, const std::vector<std::size_t>& hidden,
                     const std::string& activation, const asds::TargetTrainSpec& spec,
                     const std::string& out_dir) {
    require_file(data_path);
    prepare_out(out_dir);
    const auto ds = asds::load_dataset<float>(data_path);
    asds::TargetModel<float> model(ds.dims(), ds.classes, hidden,
                                   asds::activation_from(activation), spec.seed);
    const auto log = asds::train_target(model, ds, spec);
    asds::save_target(out_dir + "/target.bin", model);
    write_snapshot(out_dir, ordered_json{{"command", "train-target"},
                                         {"data", data_path},
                                         {"hidden", hidden},
                                         {"activation", activation},
                                         {"epochs", spec.epochs},
                                         {"batch", spec.batch},
                                         {"learning_rate", spec.learning_rate},
                                         {"momentum", spec.momentum},
                                         {"weight_decay", spec.weight_decay},
                                         {"seed", spec.seed},
                                         {"train_accuracy", log.train_accuracy}});
    std::cout << "train accuracy " << log.train_accuracy << "\n";
    return 0;
}

int cmd_build_bank(const std::string& data_path, const std::string& model_path,
                   const std::vector<int>& taps, bool normalize, const std::string& out_dir) {
    require_file(data_path);
    require_file(model_path);
    prepare_out(out_dir);
    const auto ds = asds::load_dataset<float>(data_path);
    const auto model = asds::load_target<float>(model_path);
    const auto lib = asds::build_library(model, ds, taps, normalize);
    asds::save_library(out_dir + "/bank.bin", lib);
    write_snapshot(out_dir, ordered_json{{"command", "build-bank"},
                                         {"data", data_path},
                                         {"model", model_path},
                                         {"taps", taps},
                                         {"normalize", normalize}});
    std::cout << "wrote " << out_dir << "/bank.bin (" << lib.size() << " entries)\n";
    return 0;
}

int cmd_attack(const std::string& data_path, const std::string& model_path,
               const std::string& bank_path, const asds::AttackConfig& acfg,
               const std::string& out_dir) {
    require_file(data_path);
    require_file(model_path);
    prepare_out(out_dir);
    const auto ds = asds::load_dataset<float>(data_path);
    const auto model = asds::load_target<float>(model_path);

    if (acfg.kind == "noise") {
        const auto noisy = asds::gen_noisy(ds.inputs, ds.valid_lo, ds.valid_hi,
                                           acfg.noise_sigma(), acfg.seed);
        asds::NamedTensors archive;
        archive.add("adversarial", noisy);
        asds::save_archive(out_dir + "/attack.bin", archive);
    } else {
        asds::QueryLibrary<float> bank;
        const asds::QueryLibrary<float>* bank_ptr = nullptr;
        if (acfg.kind == "adaptive") {
            require_file(bank_path);
            bank = asds::load_library<float>(bank_path);
            bank_ptr = &bank;
        }
        const auto result = asds::run_attack(model, acfg, ds.inputs, ds.labels, ds.valid_lo,
                                             ds.valid_hi, bank_ptr);
        asds::save_attack_result(out_dir + "/attack.bin", result, acfg);
        std::cout << "success rate " << result.success_rate() << "\n";
    }
    ordered_json ja;
    to_json(ja, acfg);
    write_snapshot(out_dir,
                   ordered_json{{"command", "attack"}, {"data", data_path},
                                {"model", model_path}, {"attack", ja}});
    return 0;
}

int cmd_train_detector(const asds::ExperimentConfig& cfg, const std::string& attack_kind,
                       const std::string& out_dir) {
    prepare_out(out_dir);
    const asds::AttackConfig* attack = cfg.find_attack(attack_kind);
    if (attack == nullptr)
        throw asds::ArgumentError("config has no attack of kind \"" + attack_kind + "\"");

    const auto bench = asds::build_benchmark<float>(cfg);
    std::cout << "target accuracy " << bench.target_accuracy << "\n";
    const auto data = asds::make_scenario_data(bench, *attack,
                                               static_cast<std::size_t>(cfg.nce.k));
    const auto suite = asds::train_detector_suite(bench, data, cfg.nce);
    asds::save_detector(out_dir + "/detector.bin", suite.nce);
    asds::save_mda(out_dir + "/mda.bin", suite.mda);
    asds::save_target(out_dir + "/target.bin", bench.model);
    asds::save_library(out_dir + "/bank.bin", bench.library);

    ordered_json snap = config_snapshot(cfg);
    snap["command"] = "train-detector";
    snap["attack"] = attack_kind;
    snap["validation_auroc"] = suite.nce.validation_auroc();
    write_snapshot(out_dir, snap);
    std::cout << "validation auroc " << suite.nce.validation_auroc() << "\n";
    return 0;
}

int cmd_score(const std::string& detector_path, const std::string& model_path,
              const std::string& bank_path, const std::string& data_path,
              const std::string& out_dir) {
    for (const auto& p : {detector_path, model_path, bank_path, data_path}) require_file(p);
    prepare_out(out_dir);
    const auto det = asds::load_detector<float>(detector_path);
    const auto model = asds::load_target<float>(model_path);
    const auto bank = asds::load_library<float>(bank_path);
    const auto ds = asds::load_dataset<float>(data_path);
    const auto scores = asds::detect_scores(det, model, bank, ds.inputs);

    std::ofstream os(out_dir + "/scores.csv", std::ios::binary);
    os << "row,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i, scores[i]);
        os << buf;
    }
    write_snapshot(out_dir, ordered_json{{"command", "score"},
                                         {"detector", detector_path},
                                         {"model", model_path},
                                         {"bank", bank_path},
                                         {"data", data_path}});
    std::cout << "wrote " << out_dir << "/scores.csv (" << scores.size() << " rows)\n";
    return 0;
}

int cmd_eval(const asds::ExperimentConfig& cfg, const std::string& out_dir) {
    prepare_out(out_dir);
    const auto bench = asds::build_benchmark<float>(cfg);
    std::cout << "target accuracy " << bench.target_accuracy << "\n";

    asds::EvalReport report;
    report.config_snapshot = config_snapshot(cfg);
    report.config_snapshot["command"] = "eval";
    report.config_snapshot["target_accuracy"] = bench.target_accuracy;

    // Attack-aware rows per non-adaptive attack; the first attack's
    // suite also serves transfer and white-box evaluation.
    const asds::DetectorSuite<float>* anchor_suite = nullptr;
    std::string anchor_kind;
    std::vector<std::pair<std::string, asds::ScenarioData<float>>> scenarios;
    std::vector<asds::DetectorSuite<float>> suites;
    for (const auto& attack : cfg.attacks) {
        if (attack.kind == "adaptive") continue;
        auto data = asds::make_scenario_data(bench, attack, static_cast<std::size_t>(cfg.nce.k));
        std::cout << attack.kind << " success rate (eval split) " << data.attack_success_eval
                  << "\n";
        suites.push_back(asds::train_detector_suite(bench, data, cfg.nce));
        scenarios.emplace_back(attack.kind, std::move(data));
    }
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto rows = asds::run_attack_aware(scenarios[i].second, suites[i]);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        if (i == 0) {
            anchor_suite = &suites[0];
            anchor_kind = scenarios[0].first;
        }
    }

    if (anchor_suite != nullptr) {
        for (std::size_t i = 1; i < scenarios.size(); ++i) {
            const auto rows =
                asds::run_attack_unaware(*anchor_suite, anchor_kind, scenarios[i].second);
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        }
        if (const asds::AttackConfig* adaptive = cfg.find_attack("adaptive")) {
            const auto data =
                asds::make_scenario_data(bench, *adaptive, static_cast<std::size_t>(cfg.nce.k));
            std::cout << "adaptive success rate (eval split) " << data.attack_success_eval << "\n";
            const auto rows = asds::run_whitebox(*anchor_suite, anchor_kind, data);
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        }
    }

    asds::write_report_json(out_dir + "/report.json", report);
    asds::write_report_csv(out_dir + "/report.csv", report.rows);
    write_snapshot(out_dir, report.config_snapshot);
    std::cout << "wrote " << out_dir << "/report.csv (" << report.rows.size() << " rows)\n";
    return 0;
}

int cmd_ablate(const asds::ExperimentConfig& cfg, const std::string& attack_kind,
               const std::vector<int>& ks, const std::vector<int>& Ds,
               const std::string& out_dir) {
    prepare_out(out_dir);
    const asds::AttackConfig* attack = cfg.find_attack(attack_kind);
    if (attack == nullptr)
        throw asds::ArgumentError("config has no attack of kind \"" + attack_kind + "\"");
    const auto bench = asds::build_benchmark<float>(cfg);
    std::cout << "target accuracy " << bench.target_accuracy << "\n";

    std::vector<std::string> skipped;
    const auto rows = asds::ablation_sweep(bench, *attack, ks, Ds, &skipped);
    for (const auto& s : skipped) std::cerr << "skipped: " << s << "\n";
    asds::write_report_csv(out_dir + "/ablation.csv", rows);

    ordered_json snap = config_snapshot(cfg);
    snap["command"] = "ablate";
    snap["attack"] = attack_kind;
    snap["k_grid"] = ks;
    snap["D_grid"] = Ds;
    snap["skipped"] = skipped;
    write_snapshot(out_dir, snap);
    std::cout << "wrote " << out_dir << "/ablation.csv (" << rows.size() << " cells)\n";
    return 0;
}

int cmd_baseline(const asds::ExperimentConfig& cfg, const std::string& attack_kind,
                 const std::string& out_dir) {
    prepare_out(out_dir);
    const asds::AttackConfig* attack = cfg.find_attack(attack_kind);
    if (attack == nullptr)
        throw asds::ArgumentError("config has no attack of kind \"" + attack_kind + "\"");
    const auto bench = asds::build_benchmark<float>(cfg);
    const auto data = asds::make_scenario_data(bench, *attack,
                                               static_cast<std::size_t>(cfg.nce.k));

    // Baselines only: MDA fit + combiners, no NCE training.
    const auto mda = asds::mda_fit(data.feat_train_clean, bench.det_train_split.labels,
                                   cfg.classes, cfg.taps);
    asds::LogisticCombiner lid_comb, mda_comb;
    {
        asds::DetectionDataset train;
        train.append(data.ctx_train_clean, 0);
        train.append(data.ctx_train_noisy, 0);
        train.append(data.ctx_train_adv, 1);
        lid_comb.fit(asds::lid_feature_matrix(train.contexts), train.labels);
        const auto feats = asds::detail::concat_feature_sets<float>(
            {&data.feat_train_clean, &data.feat_train_noisy, &data.feat_train_adv});
        std::vector<char> labels(data.feat_train_clean[0].rows(), 0);
        labels.insert(labels.end(), data.feat_train_noisy[0].rows(), 0);
        labels.insert(labels.end(), data.feat_train_adv[0].rows(), 1);
        mda_comb.fit(asds::mda_tap_scores(mda, feats), labels);
    }

    const auto lid_of = [](const std::vector<asds::NeighborContext>& ctxs) {
        std::vector<double> out;
        for (const auto& c : ctxs) out.push_back(asds::lid_context_score(c));
        return out;
    };
    std::vector<asds::EvalRow> rows;
    rows.push_back(asds::detail::score_row("baseline", attack_kind, attack_kind, "lid", cfg.nce.k,
                                           cfg.nce.D, lid_of(data.ctx_eval_clean),
                                           lid_of(data.ctx_eval_noisy),
                                           lid_of(data.ctx_eval_adv)));
    rows.push_back(asds::detail::score_row(
        "baseline", attack_kind, attack_kind, "lid_logistic", cfg.nce.k, cfg.nce.D,
        lid_comb.score_rows(asds::lid_feature_matrix(data.ctx_eval_clean)),
        lid_comb.score_rows(asds::lid_feature_matrix(data.ctx_eval_noisy)),
        lid_comb.score_rows(asds::lid_feature_matrix(data.ctx_eval_adv))));
    rows.push_back(asds::detail::score_row("baseline", attack_kind, attack_kind, "mda", cfg.nce.k,
                                           cfg.nce.D, asds::mda_scores(mda, data.feat_eval_clean),
                                           asds::mda_scores(mda, data.feat_eval_noisy),
                                           asds::mda_scores(mda, data.feat_eval_adv)));
    rows.push_back(asds::detail::score_row(
        "baseline", attack_kind, attack_kind, "mda_logistic", cfg.nce.k, cfg.nce.D,
        mda_comb.score_rows(asds::mda_tap_scores(mda, data.feat_eval_clean)),
        mda_comb.score_rows(asds::mda_tap_scores(mda, data.feat_eval_noisy)),
        mda_comb.score_rows(asds::mda_tap_scores(mda, data.feat_eval_adv))));

    asds::write_report_csv(out_dir + "/baseline.csv", rows);
    asds::save_mda(out_dir + "/mda.bin", mda);
    ordered_json snap = config_snapshot(cfg);
    snap["command"] = "baseline";
    snap["attack"] = attack_kind;
    write_snapshot(out_dir, snap);
    std::cout << "wrote " << out_dir << "/baseline.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial-subspace detection toolkit"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic labeled dataset");
    std::string g_family = "gaussian_mixture", g_out = "out";
    std::size_t g_dims = 20, g_n = 6000;
    int g_classes = 5;
    double g_sep = 3.5;
    std::uint64_t g_seed = 42;
    gen->add_option("--family", g_family, "gaussian_mixture | two_rings | hypercube_corners");
    gen->add_option("--dims", g_dims, "input dimensionality");
    gen->add_option("--classes", g_classes, "class count");
    gen->add_option("--n", g_n, "sample count");
    gen->add_option("--separation", g_sep, "class separation scale");
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--out", g_out, "output directory");

    // ---- train-target ----
    auto* tt = app.add_subcommand("train-target", "Train the target classifier");
    std::string t_data, t_activation = "relu", t_out = "out";
    std::vector<std::size_t> t_hidden = {64, 64};
    asds::TargetTrainSpec t_spec;
    tt->add_option("--data", t_data, "dataset path")->required();
    tt->add_option("--hidden", t_hidden, "hidden layer widths");
    tt->add_option("--activation", t_activation, "relu | tanh");
    tt->add_option("--epochs", t_spec.epochs);
    tt->add_option("--batch", t_spec.batch);
    tt->add_option("--lr", t_spec.learning_rate);
    tt->add_option("--momentum", t_spec.momentum);
    tt->add_option("--weight-decay", t_spec.weight_decay);
    tt->add_option("--seed", t_spec.seed);
    tt->add_option("--out", t_out, "output directory");

    // ---- build-bank ----
    auto* bb = app.add_subcommand("build-bank", "Build the query library from clean data");
    std::string b_data, b_model, b_out = "out";
    std::vector<int> b_taps = {1, 2, 3};
    bool b_normalize = false;
    bb->add_option("--data", b_data, "dataset path")->required();
    bb->add_option("--model", b_model, "target model path")->required();
    bb->add_option("--taps", b_taps, "feature taps");
    bb->add_flag("--normalize", b_normalize, "L2-normalize feature rows");
    bb->add_option("--out", b_out, "output directory");

    // ---- attack ----
    auto* at = app.add_subcommand("attack", "Generate adversarial or noisy inputs");
    std::string a_data, a_model, a_bank, a_out = "out";
    asds::AttackConfig a_cfg;
    at->add_option("--data", a_data, "dataset path")->required();
    at->add_option("--model", a_model, "target model path")->required();
    at->add_option("--bank", a_bank, "query library (adaptive attack only)");
    at->add_option("--kind", a_cfg.kind, "fgsm | bim | deepfool | cw | adaptive | noise");
    at->add_option("--epsilon", a_cfg.epsilon);
    at->add_option("--alpha", a_cfg.alpha);
    at->add_option("--iters", a_cfg.iters);
    at->add_option("--c", a_cfg.c);
    at->add_option("--kappa", a_cfg.kappa);
    at->add_option("--lr", a_cfg.lr);
    at->add_option("--eta", a_cfg.eta);
    at->add_option("--sigma", a_cfg.sigma);
    at->add_option("--seed", a_cfg.seed);
    at->add_option("--out", a_out, "output directory");

    // ---- shared config flags for pipeline commands ----
    const auto add_config_flags = [](CLI::App* cmd, std::string& config, std::uint64_t& seed,
                                     int& k, int& d, std::string& out) {
        cmd->add_option("--config", config, "experiment config JSON (defaults used when absent)");
        cmd->add_option("--seed", seed, "override config seed");
        cmd->add_option("--k", k, "override detector k");
        cmd->add_option("--D", d, "override embedding size D");
        cmd->add_option("--out", out, "output directory");
    };

    // ---- train-detector ----
    auto* td = app.add_subcommand("train-detector", "Train the detector suite on one attack");
    std::string td_config, td_attack = "fgsm", td_out = "out";
    std::uint64_t td_seed = 0;
    int td_k = 0, td_D = 0;
    td->add_option("--attack", td_attack, "training attack kind");
    add_config_flags(td, td_config, td_seed, td_k, td_D, td_out);

    // ---- score ----
    auto* sc = app.add_subcommand("score", "Score inputs with a trained detector");
    std::string s_det, s_model, s_bank, s_data, s_out = "out";
    sc->add_option("--detector", s_det, "detector checkpoint")->required();
    sc->add_option("--model", s_model, "target model path")->required();
    sc->add_option("--bank", s_bank, "query library path")->required();
    sc->add_option("--data", s_data, "dataset path")->required();
    sc->add_option("--out", s_out, "output directory");

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "Full protocol: attack-aware, transfer, white-box");
    std::string ev_config, ev_out = "out";
    std::uint64_t ev_seed = 0;
    int ev_k = 0, ev_D = 0;
    add_config_flags(ev, ev_config, ev_seed, ev_k, ev_D, ev_out);

    // ---- ablate ----
    auto* ab = app.add_subcommand("ablate", "k x D ablation sweep");
    std::string ab_config, ab_attack = "fgsm", ab_out = "out";
    std::uint64_t ab_seed = 0;
    int ab_k = 0, ab_D = 0;
    std::vector<int> ab_ks = {5, 10, 20, 50, 100};
    std::vector<int> ab_Ds = {4, 8, 16, 32, 64};
    ab->add_option("--attack", ab_attack, "attack kind for the sweep");
    ab->add_option("--ks", ab_ks, "k grid");
    ab->add_option("--Ds", ab_Ds, "D grid");
    add_config_flags(ab, ab_config, ab_seed, ab_k, ab_D, ab_out);

    // ---- baseline ----
    auto* bl = app.add_subcommand("baseline", "LID/MDA baselines without the NCE");
    std::string bl_config, bl_attack = "fgsm", bl_out = "out";
    std::uint64_t bl_seed = 0;
    int bl_k = 0, bl_D = 0;
    bl->add_option("--attack", bl_attack, "attack kind");
    add_config_flags(bl, bl_config, bl_seed, bl_k, bl_D, bl_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // --help: usage text, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints message + suggestion
        return 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(g_family, g_dims, g_classes, g_n, g_sep, g_seed, g_out);
        if (tt->parsed()) return cmd_train_target(t_data, t_hidden, t_activation, t_spec, t_out);
        if (bb->parsed()) return cmd_build_bank(b_data, b_model, b_taps, b_normalize, b_out);
        if (at->parsed()) return cmd_attack(a_data, a_model, a_bank, a_cfg, a_out);
        if (td->parsed())
            return cmd_train_detector(resolve_config(td_config, td_seed, td_k, td_D), td_attack,
                                      td_out);
        if (sc->parsed()) return cmd_score(s_det, s_model, s_bank, s_data, s_out);
        if (ev->parsed()) return cmd_eval(resolve_config(ev_config, ev_seed, ev_k, ev_D), ev_out);
        if (ab->parsed())
            return cmd_ablate(resolve_config(ab_config, ab_seed, ab_k, ab_D), ab_attack, ab_ks,
                              ab_Ds, ab_out);
        if (bl->parsed())
            return cmd_baseline(resolve_config(bl_config, bl_seed, bl_k, bl_D), bl_attack, bl_out);
    } catch (const asds::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
