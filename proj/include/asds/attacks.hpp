#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/query_library.hpp"
#include "asds/rng.hpp"
#include "asds/target_model.hpp"

namespace asds {

/// Hyperparameters for every attack kind in one bag; each generator
/// reads only the fields it needs.
struct AttackConfig {
    std::string kind = "fgsm"; // fgsm | bim | deepfool | cw | adaptive | noise
    double epsilon = 0.5;      // L-inf budget (fgsm/bim/adaptive), input units
    double alpha = 0;          // step size; <= 0 picks a kind-specific default
    int iters = 10;
    double c = 1.0;            // cw trade-off
    double kappa = 0.0;        // cw confidence
    double lr = 0.05;          // cw step size
    double eta = 0.02;         // deepfool overshoot
    double sigma = -1;         // noise std; < 0 defaults to epsilon
    std::uint64_t seed = 0;

    void check() const {
        require(epsilon >= 0, "attack: epsilon must be >= 0");
        require(iters >= 1, "attack: iters must be >= 1");
        require(c > 0, "attack: c must be > 0");
    }

    double noise_sigma() const { return sigma < 0 ? epsilon : sigma; }
};

inline void to_json(nlohmann::ordered_json& j, const AttackConfig& a) {
    j = {{"kind", a.kind},   {"epsilon", a.epsilon}, {"alpha", a.alpha}, {"iters", a.iters},
         {"c", a.c},         {"kappa", a.kappa},     {"lr", a.lr},       {"eta", a.eta},
         {"sigma", a.sigma}, {"seed", a.seed}};
}

inline void from_json(const nlohmann::json& j, AttackConfig& a) {
    a.kind = j.value("kind", a.kind);
    a.epsilon = j.value("epsilon", a.epsilon);
    a.alpha = j.value("alpha", a.alpha);
    a.iters = j.value("iters", a.iters);
    a.c = j.value("c", a.c);
    a.kappa = j.value("kappa", a.kappa);
    a.lr = j.value("lr", a.lr);
    a.eta = j.value("eta", a.eta);
    a.sigma = j.value("sigma", a.sigma);
    a.seed = j.value("seed", a.seed);
}

/// One attack run over a batch. Success means the model's label on the
/// adversarial input differs from its label on the clean input.
template <typename T>
struct AttackResult {
    Tensor<T> adversarial;               // [n, dims], clipped to valid_range
    std::vector<char> success;           // per row
    std::vector<double> linf;            // per-row max |delta|
    std::vector<double> l2;              // per-row Euclidean |delta|
    std::vector<char> error;             // per-row failure flags (adaptive only)
    std::vector<double> objective_trace; // best-so-far objective per iterate, where tracked

    double success_rate() const {
        if (success.empty()) return 0;
        std::size_t hits = 0;
        for (char s : success) hits += s != 0;
        return static_cast<double>(hits) / static_cast<double>(success.size());
    }
};

namespace detail {

template <typename T>
void clip_box_inplace(Tensor<T>& x, const Tensor<T>& lo, const Tensor<T>& hi) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        T* row = x.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j)
            row[j] = std::min(hi[j], std::max(lo[j], row[j]));
    }
}

/// Clamp every coordinate of x into the epsilon ball around x0, then
/// into the valid box. Provided x0 itself sits in the box, the box clamp
/// can only move a coordinate toward x0, so the ball bound survives it.
/// A final ulp-nudge toward x0 absorbs the cast round-off that could
/// otherwise leave |x - x0| a hair above epsilon in working precision.
template <typename T>
void project_ball_box(Tensor<T>& x, const Tensor<T>& x0, double epsilon, const Tensor<T>& lo,
                      const Tensor<T>& hi) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        T* row = x.row(i);
        const T* base = x0.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const T b_lo = static_cast<T>(base[j] - epsilon);
            const T b_hi = static_cast<T>(base[j] + epsilon);
            row[j] = std::min(b_hi, std::max(b_lo, row[j]));
            row[j] = std::min(hi[j], std::max(lo[j], row[j]));
            while (std::abs(double(row[j]) - double(base[j])) > epsilon && row[j] != base[j])
                row[j] = std::nextafter(row[j], base[j]);
        }
    }
}

/// Fills norms and success flags from the final adversarial batch.
template <typename T>
void finalize(AttackResult<T>& result, const TargetModel<T>& model, const Tensor<T>& clean) {
    const std::size_t n = clean.rows(), d = clean.cols();
    result.linf.assign(n, 0);
    result.l2.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double max_abs = 0, sq = 0;
        const T* a = result.adversarial.row(i);
        const T* b = clean.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = double(a[j]) - double(b[j]);
            max_abs = std::max(max_abs, std::abs(delta));
            sq += delta * delta;
        }
        result.linf[i] = max_abs;
        result.l2[i] = std::sqrt(sq);
    }
    const auto before = model.predict(clean);
    const auto after = model.predict(result.adversarial);
    result.success.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) result.success[i] = after[i] != before[i];
    if (result.error.empty()) result.error.assign(n, 0);
}

} // namespace detail

/// Clean inputs plus Gaussian noise, clipped to the valid box. These are
/// the "noisy" negatives paired with each attack.
template <typename T>
Tensor<T> gen_noisy(const Tensor<T>& inputs, const Tensor<T>& lo, const Tensor<T>& hi,
                    double sigma, std::uint64_t seed) {
    require(sigma >= 0, "gen_noisy: sigma must be >= 0");
    Tensor<T> out = inputs;
    Rng rng(seed);
    for (auto& v : out.vec()) v = static_cast<T>(v + sigma * rng.normal());
    detail::clip_box_inplace(out, lo, hi);
    return out;
}

/// Fast gradient sign method: x' = clip(x + epsilon * sign(dL/dx)) with
/// cross-entropy loss against the supplied labels. sign(0) moves nothing.
template <typename T>
AttackResult<T> fgsm(const TargetModel<T>& model, const Tensor<T>& inputs,
                     const std::vector<int>& labels, double epsilon, const Tensor<T>& lo,
                     const Tensor<T>& hi) {
    require(epsilon >= 0, "fgsm: epsilon must be >= 0");
    AttackResult<T> result;
    result.adversarial = inputs;
    const Tensor<T> g = model.input_gradient_ce(inputs, labels);
    for (std::size_t i = 0; i < g.numel(); ++i) {
        const T step = g[i] > T(0) ? T(1) : (g[i] < T(0) ? T(-1) : T(0));
        result.adversarial[i] = static_cast<T>(result.adversarial[i] + epsilon * step);
    }
    detail::project_ball_box(result.adversarial, inputs, epsilon, lo, hi);
    detail::finalize(result, model, inputs);
    return result;
}

/// Basic iterative method: repeated signed steps, with every iterate
/// projected into the epsilon ball of the original input and the valid
/// box. iters=1 with alpha=epsilon collapses to fgsm.
template <typename T>
AttackResult<T> bim(const TargetModel<T>& model, const Tensor<T>& inputs,
                    const std::vector<int>& labels, double epsilon, double alpha, int iters,
                    const Tensor<T>& lo, const Tensor<T>& hi) {
    require(epsilon >= 0, "bim: epsilon must be >= 0");
    require(alpha > 0, "bim: alpha must be > 0");
    require(iters >= 1, "bim: iters must be >= 1");
    AttackResult<T> result;
    result.adversarial = inputs;
    for (int it = 0; it < iters; ++it) {
        const Tensor<T> g = model.input_gradient_ce(result.adversarial, labels);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            const T step = g[i] > T(0) ? T(1) : (g[i] < T(0) ? T(-1) : T(0));
            result.adversarial[i] = static_cast<T>(result.adversarial[i] + alpha * step);
        }
        detail::project_ball_box(result.adversarial, inputs, epsilon, lo, hi);
    }
    detail::finalize(result, model, inputs);
    return result;
}

/// DeepFool: walk each input to its nearest decision boundary using the
/// per-class linearization, then overshoot by (1+eta). The original
/// label defaults to the model's own prediction; pass original_labels to
/// override (rows already off that label take zero iterations).
template <typename T>
AttackResult<T> deepfool(const TargetModel<T>& model, const Tensor<T>& inputs, int max_iters,
                         double eta, const Tensor<T>& lo, const Tensor<T>& hi,
                         const std::vector<int>* original_labels = nullptr) {
    require(max_iters >= 1, "deepfool: max_iters must be >= 1");
    require(eta >= 0, "deepfool: eta must be >= 0");
    const std::size_t n = inputs.rows(), d = inputs.cols();
    const int classes = model.classes();

    std::vector<int> original = original_labels ? *original_labels : model.predict(inputs);
    require(original.size() == n, "deepfool: original label count mismatch");

    AttackResult<T> result;
    result.adversarial = inputs;
    Tensor<T> r_total({n, d});
    r_total.fill(T(0));

    std::vector<std::size_t> active;
    {
        const auto pred = model.predict(inputs);
        for (std::size_t i = 0; i < n; ++i)
            if (pred[i] == original[i]) active.push_back(i);
    }

    for (int it = 0; it < max_iters && !active.empty(); ++it) {
        Tensor<T> xa({active.size(), d});
        for (std::size_t a = 0; a < active.size(); ++a)
            std::copy(result.adversarial.row(active[a]), result.adversarial.row(active[a]) + d,
                      xa.row(a));

        // One tape, one forward; per-class column sums give each row's
        // logit gradient in one backward pass per class.
        Tape<T> tape;
        const auto xv = tape.leaf(xa, true, "x");
        const auto z = model.build_forward(tape, xv);
        const Tensor<T> logits = tape.value(z);
        std::vector<Tensor<T>> jac(static_cast<std::size_t>(classes));
        for (int c = 0; c < classes; ++c) {
            tape.zero_grad();
            tape.backward(tape.sum(tape.slice_cols(z, std::size_t(c), std::size_t(c) + 1)));
            jac[static_cast<std::size_t>(c)] = tape.grad(xv);
        }

        for (std::size_t a = 0; a < active.size(); ++a) {
            const std::size_t row = active[a];
            const int y = original[row];
            double best_dist = std::numeric_limits<double>::infinity();
            int best_c = -1;
            double best_wsq = 0, best_f = 0;
            for (int c = 0; c < classes; ++c) {
                if (c == y) continue;
                double wsq = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double w =
                        double(jac[std::size_t(c)](a, j)) - double(jac[std::size_t(y)](a, j));
                    wsq += w * w;
                }
                if (wsq == 0) continue;
                const double f = double(logits(a, c)) - double(logits(a, y));
                const double dist = std::abs(f) / std::sqrt(wsq);
                if (dist < best_dist) {
                    best_dist = dist;
                    best_c = c;
                    best_wsq = wsq;
                    best_f = f;
                }
            }
            if (best_c < 0) continue; // fully degenerate linearization; leave the row alone
            const double scale = std::abs(best_f) / best_wsq;
            for (std::size_t j = 0; j < d; ++j) {
                const double w = double(jac[std::size_t(best_c)](a, j)) -
                                 double(jac[std::size_t(y)](a, j));
                r_total(row, j) = static_cast<T>(r_total(row, j) + scale * w);
            }
        }

        for (std::size_t a = 0; a < active.size(); ++a) {
            const std::size_t row = active[a];
            for (std::size_t j = 0; j < d; ++j)
                result.adversarial(row, j) =
                    static_cast<T>(inputs(row, j) + (1.0 + eta) * r_total(row, j));
        }
        detail::clip_box_inplace(result.adversarial, lo, hi);

        const auto pred = model.predict(result.adversarial);
        std::vector<std::size_t> still;
        for (std::size_t row : active)
            if (pred[row] == original[row]) still.push_back(row);
        active = std::move(still);
    }

    detail::finalize(result, model, inputs);
    return result;
}

/// Carlini-Wagner L2 in the clipped-input parameterization: projected
/// subgradient descent on ||delta||^2 + c * max(Z_y - max_{j!=y} Z_j, -kappa),
/// tracking the best (smallest-norm) adversarial iterate per row. The
/// trace records the mean best-so-far objective after each step.
template <typename T>
AttackResult<T> cw(const TargetModel<T>& model, const Tensor<T>& inputs,
                   const std::vector<int>& labels, double c, double kappa, int iters, double lr,
                   const Tensor<T>& lo, const Tensor<T>& hi) {
    require(c > 0, "cw: c must be > 0");
    require(kappa >= 0, "cw: kappa must be >= 0");
    require(iters >= 1, "cw: iters must be >= 1");
    require(lr > 0, "cw: lr must be > 0");
    const std::size_t n = inputs.rows(), d = inputs.cols();
    require(labels.size() == n, "cw: label count mismatch");
    const int classes = model.classes();

    Tensor<T> current = inputs;
    std::vector<double> best_objective(n, std::numeric_limits<double>::infinity());
    std::vector<double> best_adv_l2(n, std::numeric_limits<double>::infinity());
    Tensor<T> best_adv = inputs;
    std::vector<char> found(n, 0);

    AttackResult<T> result;
    const auto record = [&](const Tensor<T>& logits) {
        // Per-row bookkeeping at the current iterate.
        for (std::size_t i = 0; i < n; ++i) {
            double sq = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double delta = double(current(i, j)) - double(inputs(i, j));
                sq += delta * delta;
            }
            const int y = labels[i];
            double other = -std::numeric_limits<double>::infinity();
            int arg_other = -1;
            for (int k = 0; k < classes; ++k) {
                if (k == y) continue;
                if (double(logits(i, std::size_t(k))) > other) {
                    other = double(logits(i, std::size_t(k)));
                    arg_other = k;
                }
            }
            const double margin = double(logits(i, std::size_t(y))) - other;
            best_objective[i] = std::min(best_objective[i], sq + c * std::max(margin, -kappa));
            const bool adversarial = margin < 0; // model prefers some other class
            if (adversarial && sq < best_adv_l2[i]) {
                best_adv_l2[i] = sq;
                found[i] = 1;
                std::copy(current.row(i), current.row(i) + d, best_adv.row(i));
            }
            (void)arg_other;
        }
        double mean = 0;
        for (double b : best_objective) mean += b;
        result.objective_trace.push_back(mean / static_cast<double>(n));
    };

    record(model.forward(current));
    for (int it = 0; it < iters; ++it) {
        Tape<T> tape;
        const auto xv = tape.leaf(current, true, "x");
        const auto z = model.build_forward(tape, xv);
        const Tensor<T> logits = tape.value(z);

        // Row selector S picks +Z_y and -Z_{j*} (current runner-up);
        // rows whose margin is already <= -kappa contribute no margin
        // gradient this step.
        Tensor<T> selector({n, std::size_t(classes)});
        selector.fill(T(0));
        for (std::size_t i = 0; i < n; ++i) {
            const int y = labels[i];
            double other = -std::numeric_limits<double>::infinity();
            int arg_other = -1;
            for (int k = 0; k < classes; ++k) {
                if (k == y) continue;
                if (double(logits(i, std::size_t(k))) > other) {
                    other = double(logits(i, std::size_t(k)));
                    arg_other = k;
                }
            }
            const double margin = double(logits(i, std::size_t(y))) - other;
            if (margin > -kappa) {
                selector(i, std::size_t(y)) = T(1);
                selector(i, std::size_t(arg_other)) = T(-1);
            }
        }

        const auto delta = tape.sub(xv, tape.constant(inputs));
        const auto margin_term = tape.sum(tape.mul(tape.constant(selector), z));
        const auto loss =
            tape.add(tape.sumsq(delta), tape.scalar_mul(margin_term, static_cast<T>(c)));
        tape.backward(loss);
        const Tensor<T>& g = tape.grad(xv);
        for (std::size_t i = 0; i < current.numel(); ++i)
            current[i] = static_cast<T>(current[i] - lr * g[i]);
        detail::clip_box_inplace(current, lo, hi);
        record(model.forward(current));
    }

    result.adversarial = best_adv;
    for (std::size_t i = 0; i < n; ++i)
        if (!found[i]) std::copy(current.row(i), current.row(i) + d, result.adversarial.row(i));
    detail::finalize(result, model, inputs);
    return result;
}

/// White-box attack on the detector's retrieval context: pick the
/// nearest bank sample with a different label (deepest tap, Euclidean)
/// and descend the squared feature distance to it, projected to the
/// epsilon ball and valid box. Keeps the best-so-far iterate per row.
template <typename T>
AttackResult<T> adaptive_whitebox(const TargetModel<T>& model, const QueryLibrary<T>& bank,
                                  const Tensor<T>& inputs, double epsilon, double alpha, int iters,
                                  const Tensor<T>& lo, const Tensor<T>& hi) {
    require(epsilon >= 0, "adaptive: epsilon must be >= 0");
    require(iters >= 1, "adaptive: iters must be >= 1");
    bank.check();
    require(bank.classes >= 2, "adaptive: bank must cover >= 2 classes");
    const std::size_t n = inputs.rows(), d = inputs.cols();
    const int tap = bank.taps.back();
    const Tensor<T>& bank_feats = bank.features.back();
    const std::size_t fd = bank_feats.cols();
    if (alpha <= 0) alpha = epsilon / 4;

    AttackResult<T> result;
    result.error.assign(n, 0);

    // Per-row target = nearest different-label bank sample by deepest-tap
    // feature distance, computed from each clean input's own prediction.
    const std::vector<int> original = model.predict(inputs);
    std::vector<Tensor<T>> feats =
        model.extract_features(inputs, std::vector<int>{tap});
    if (bank.normalized) detail::l2_normalize_rows(feats[0]);
    Tensor<T> targets({n, fd});
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        long best_idx = -1;
        for (std::size_t b = 0; b < bank.size(); ++b) {
            if (bank.labels[b] == original[i]) continue;
            const double dist = euclidean(bank_feats.row(b), feats[0].row(i), fd);
            if (dist < best || (dist == best && static_cast<long>(b) < best_idx)) {
                best = dist;
                best_idx = static_cast<long>(b);
            }
        }
        if (best_idx < 0) {
            result.error[i] = 1;
            continue;
        }
        std::copy(bank_feats.row(std::size_t(best_idx)),
                  bank_feats.row(std::size_t(best_idx)) + fd, targets.row(i));
    }

    Tensor<T> current = inputs;
    Tensor<T> best_x = inputs;
    std::vector<double> best_dist(n, std::numeric_limits<double>::infinity());
    const auto score = [&](const Tensor<T>& x, std::vector<double>& out) {
        std::vector<Tensor<T>> f = model.extract_features(x, std::vector<int>{tap});
        if (bank.normalized) detail::l2_normalize_rows(f[0]);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = result.error[i] ? 0 : euclidean(f[0].row(i), targets.row(i), fd);
    };

    std::vector<double> dist_now;
    score(current, dist_now);
    for (std::size_t i = 0; i < n; ++i) best_dist[i] = dist_now[i];
    result.objective_trace.push_back(
        std::accumulate(best_dist.begin(), best_dist.end(), 0.0) / double(n));

    for (int it = 0; it < iters; ++it) {
        const Tensor<T> g = model.input_gradient_feature(current, tap, targets);
        for (std::size_t i = 0; i < n; ++i) {
            if (result.error[i]) continue;
            double norm = 0;
            const T* grow = g.row(i);
            for (std::size_t j = 0; j < d; ++j) norm += double(grow[j]) * grow[j];
            norm = std::sqrt(norm);
            if (norm == 0) continue; // fixed point: features already match the target
            T* row = current.row(i);
            for (std::size_t j = 0; j < d; ++j)
                row[j] = static_cast<T>(row[j] - alpha * grow[j] / norm);
        }
        detail::project_ball_box(current, inputs, epsilon, lo, hi);
        score(current, dist_now);
        for (std::size_t i = 0; i < n; ++i) {
            if (dist_now[i] < best_dist[i]) {
                best_dist[i] = dist_now[i];
                std::copy(current.row(i), current.row(i) + d, best_x.row(i));
            }
        }
        result.objective_trace.push_back(
            std::accumulate(best_dist.begin(), best_dist.end(), 0.0) / double(n));
    }

    result.adversarial = best_x;
    detail::finalize(result, model, inputs);
    for (std::size_t i = 0; i < n; ++i)
        if (result.error[i]) result.success[i] = 0;
    return result;
}

inline constexpr int kAttackSchemaVersion = 1;

template <typename T>
void save_attack_result(const std::string& path, const AttackResult<T>& result,
                        const AttackConfig& config) {
    NamedTensors archive;
    archive.add("adversarial", result.adversarial);
    const auto as_f64 = [](const auto& v) {
        Tensor<double> t({v.size()});
        for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<double>(v[i]);
        return t;
    };
    archive.add("success", as_f64(result.success));
    archive.add("linf", as_f64(result.linf));
    archive.add("l2", as_f64(result.l2));
    archive.add("error", as_f64(result.error));
    if (!result.objective_trace.empty())
        archive.add("objective_trace", as_f64(result.objective_trace));
    save_archive(path, archive);

    double l2_mean = 0, linf_max = 0;
    for (double v : result.l2) l2_mean += v;
    if (!result.l2.empty()) l2_mean /= static_cast<double>(result.l2.size());
    for (double v : result.linf) linf_max = std::max(linf_max, v);

    nlohmann::ordered_json meta;
    meta["schema_version"] = kAttackSchemaVersion;
    nlohmann::ordered_json cfg;
    to_json(cfg, config);
    meta["config"] = cfg;
    meta["n"] = result.success.size();
    meta["success_rate"] = result.success_rate();
    meta["l2_mean"] = l2_mean;
    meta["linf_max"] = linf_max;
    std::ofstream os(path + ".json");
    if (!os) throw FormatError("cannot write attack sidecar \"" + path + ".json\"");
    os << meta.dump(2) << "\n";
}

template <typename T = float>
AttackResult<T> load_attack_result(const std::string& path) {
    const NamedTensors archive = load_archive(path);
    AttackResult<T> result;
    result.adversarial = archive.get<T>("adversarial");
    const auto to_chars = [&](const char* name, std::vector<char>& out) {
        const Tensor<double>& t = archive.get<double>(name);
        out.resize(t.numel());
        for (std::size_t i = 0; i < t.numel(); ++i) out[i] = t[i] != 0;
    };
    const auto to_doubles = [&](const char* name, std::vector<double>& out) {
        const Tensor<double>& t = archive.get<double>(name);
        out.assign(t.vec().begin(), t.vec().end());
    };
    to_chars("success", result.success);
    to_doubles("linf", result.linf);
    to_doubles("l2", result.l2);
    to_chars("error", result.error);
    if (archive.find("objective_trace")) to_doubles("objective_trace", result.objective_trace);
    return result;
}

/// Dispatch by config.kind. `labels` drives the loss for fgsm/bim/cw;
/// deepfool and adaptive derive labels from the model itself.
template <typename T>
AttackResult<T> run_attack(const TargetModel<T>& model, const AttackConfig& config,
                           const Tensor<T>& inputs, const std::vector<int>& labels,
                           const Tensor<T>& lo, const Tensor<T>& hi,
                           const QueryLibrary<T>* bank = nullptr) {
    config.check();
    if (config.kind == "fgsm") return fgsm(model, inputs, labels, config.epsilon, lo, hi);
    if (config.kind == "bim") {
        const double alpha = config.alpha > 0 ? config.alpha : 1.25 * config.epsilon / config.iters;
        return bim(model, inputs, labels, config.epsilon, alpha, config.iters, lo, hi);
    }
    if (config.kind == "deepfool")
        return deepfool(model, inputs, config.iters, config.eta, lo, hi);
    if (config.kind == "cw")
        return cw(model, inputs, labels, config.c, config.kappa, config.iters, config.lr, lo, hi);
    if (config.kind == "adaptive") {
        require(bank != nullptr, "run_attack: adaptive attack needs a query library");
        const double alpha = config.alpha > 0 ? config.alpha : config.epsilon / 4;
        return adaptive_whitebox(model, *bank, inputs, config.epsilon, alpha, config.iters, lo, hi);
    }
    throw ArgumentError("unknown attack kind \"" + config.kind + "\"");
}

} // namespace asds
