#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/query_library.hpp"
#include "asds/serialize.hpp"
#include "asds/tensor.hpp"

namespace asds {

/// Local intrinsic dimensionality, maximum-likelihood estimate from the
/// k nearest-neighbor distances (given in ASCENDING order):
///   LID = -( (1/k) * sum_i ln(r_i / r_k) )^-1
/// All distances equal to r_k make the estimator undefined; that case
/// returns +inf with the degenerate flag set. A zero r_i drives the
/// estimate to 0 through the IEEE limit, which is the natural reading.
struct LidResult {
    double value = 0;
    bool degenerate = false;
};

inline LidResult lid_score(const std::vector<double>& ascending) {
    const std::size_t k = ascending.size();
    require(k >= 2, "lid: need at least two distances");
    for (std::size_t i = 1; i < k; ++i)
        require(ascending[i - 1] <= ascending[i], "lid: distances must be ascending");
    const double r_k = ascending.back();
    require(r_k > 0, "lid: largest distance must be positive");

    bool all_equal = true;
    double acc = 0;
    for (double r : ascending) {
        all_equal = all_equal && r == r_k;
        acc += std::log(r / r_k);
    }
    if (all_equal) return {std::numeric_limits<double>::infinity(), true};
    return {-1.0 / (acc / static_cast<double>(k)), false};
}

/// Per-tap LID values for one retrieval context. Context distances come
/// descending, so they are reversed first. Degenerate taps are capped at
/// a large finite value so downstream arithmetic stays finite.
inline constexpr double kLidCap = 1e6;

inline std::vector<double> lid_tap_scores(const NeighborContext& ctx) {
    std::vector<double> out;
    out.reserve(ctx.taps.size());
    for (const auto& tap : ctx.taps) {
        std::vector<double> ascending(tap.distances.rbegin(), tap.distances.rend());
        const LidResult r = lid_score(ascending);
        out.push_back(r.degenerate ? kLidCap : std::min(r.value, kLidCap));
    }
    return out;
}

/// Summed per-tap LID: the threshold-free LID detection statistic
/// (larger = more adversarial).
inline double lid_context_score(const NeighborContext& ctx) {
    double total = 0;
    for (double v : lid_tap_scores(ctx)) total += v;
    return total;
}

namespace detail {

/// In-place lower Cholesky factorization, plain O(d^3). Throws if the
/// matrix is not positive definite.
inline void cholesky(Tensor<double>& a) {
    require(a.rank() == 2 && a.rows() == a.cols(), "cholesky: need a square matrix");
    const std::size_t d = a.rows();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            if (i == j) {
                if (s <= 0) throw TrainingError("covariance is not positive definite");
                a(i, i) = std::sqrt(s);
            } else {
                a(i, j) = s / a(j, j);
            }
        }
        for (std::size_t j = i + 1; j < d; ++j) a(i, j) = 0;
    }
}

/// Squared Mahalanobis distance through the Cholesky factor: solve
/// L y = (x - mu), return |y|^2.
template <typename T>
double mahalanobis_sq(const Tensor<double>& chol, const double* mu, const T* x, std::size_t d,
                      std::vector<double>& scratch) {
    scratch.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = double(x[i]) - mu[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol(i, k) * scratch[k];
        scratch[i] = s / chol(i, i);
    }
    double out = 0;
    for (std::size_t i = 0; i < d; ++i) out += scratch[i] * scratch[i];
    return out;
}

} // namespace detail

/// Class-conditional Gaussian model per tap: class means plus a pooled
/// within-class covariance regularized by lambda * I, factored once.
/// The detection statistic is the minimum class distance summed over
/// taps (larger = more adversarial).
class MdaModel {
public:
    std::vector<int> taps;
    int classes = 0;
    std::vector<Tensor<double>> means;      // per tap, [C, d]
    std::vector<Tensor<double>> chol;       // per tap, lower factor of Sigma + lambda I
    std::vector<double> lambdas;            // per tap, the lambda actually used

    void check() const {
        require(!taps.empty() && taps.size() == means.size() && taps.size() == chol.size(),
                "mda: inconsistent tap arrays");
        require(classes >= 2, "mda: classes must be >= 2");
    }

    /// Per-tap minimum class distances for one query (features given as
    /// one pointer per tap).
    template <typename T>
    std::vector<double> tap_scores(const std::vector<const T*>& query) const {
        require(query.size() == taps.size(), "mda: query tap count mismatch");
        std::vector<double> out(taps.size());
        std::vector<double> scratch;
        for (std::size_t t = 0; t < taps.size(); ++t) {
            const std::size_t d = means[t].cols();
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < classes; ++c)
                best = std::min(best, detail::mahalanobis_sq(chol[t],
                                                             means[t].row(std::size_t(c)),
                                                             query[t], d, scratch));
            out[t] = best;
        }
        return out;
    }
};

/// Fits per-class means and the pooled within-class covariance
/// (1/(n-C) normalization) per tap. lambda < 0 selects the default
/// 1e-3 * trace(Sigma)/d, floored at 1e-3 for degenerate covariance.
template <typename T>
MdaModel mda_fit(const std::vector<Tensor<T>>& features, const std::vector<int>& labels,
                 int classes, const std::vector<int>& taps, double lambda = -1) {
    require(!features.empty() && features.size() == taps.size(), "mda_fit: tap count mismatch");
    require(classes >= 2, "mda_fit: classes must be >= 2");
    const std::size_t n = labels.size();
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    for (int y : labels) {
        require(y >= 0 && y < classes, "mda_fit: label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c)
        require(counts[c] >= 2, "mda_fit: class " + std::to_string(c) + " has fewer than 2 samples");

    MdaModel model;
    model.taps = taps;
    model.classes = classes;
    for (const auto& feats : features) {
        require(feats.rank() == 2 && feats.rows() == n, "mda_fit: feature row mismatch");
        const std::size_t d = feats.cols();

        Tensor<double> mu({static_cast<std::size_t>(classes), d});
        mu.fill(0);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = mu.row(static_cast<std::size_t>(labels[i]));
            for (std::size_t j = 0; j < d; ++j) row[j] += double(feats(i, j));
        }
        for (int c = 0; c < classes; ++c) {
            double* row = mu.row(static_cast<std::size_t>(c));
            for (std::size_t j = 0; j < d; ++j) row[j] /= double(counts[std::size_t(c)]);
        }

        Tensor<double> sigma({d, d});
        sigma.fill(0);
        std::vector<double> centered(d);
        for (std::size_t i = 0; i < n; ++i) {
            const double* m = mu.row(static_cast<std::size_t>(labels[i]));
            for (std::size_t j = 0; j < d; ++j) centered[j] = double(feats(i, j)) - m[j];
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b <= a; ++b) sigma(a, b) += centered[a] * centered[b];
        }
        const double norm = n > static_cast<std::size_t>(classes)
                                ? double(n - static_cast<std::size_t>(classes))
                                : 1.0;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b <= a; ++b) {
                sigma(a, b) /= norm;
                sigma(b, a) = sigma(a, b);
            }

        double lam = lambda;
        if (lam < 0) {
            double trace = 0;
            for (std::size_t j = 0; j < d; ++j) trace += sigma(j, j);
            lam = 1e-3 * trace / double(d);
            if (lam <= 0) lam = 1e-3;
        }
        for (std::size_t j = 0; j < d; ++j) sigma(j, j) += lam;
        detail::cholesky(sigma);

        model.means.push_back(std::move(mu));
        model.chol.push_back(std::move(sigma));
        model.lambdas.push_back(lam);
    }
    model.check();
    return model;
}

/// Per-tap score matrix [n, taps] for a batch of per-tap feature
/// matrices (each [n, d_tap]).
template <typename T>
Tensor<double> mda_tap_scores(const MdaModel& model, const std::vector<Tensor<T>>& features) {
    model.check();
    require(features.size() == model.taps.size(), "mda: feature tap count mismatch");
    const std::size_t n = features[0].rows();
    Tensor<double> out({n, model.taps.size()});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<const T*> query;
        for (const auto& f : features) query.push_back(f.row(i));
        const auto scores = model.tap_scores(query);
        for (std::size_t t = 0; t < scores.size(); ++t) out(i, t) = scores[t];
    }
    return out;
}

/// Summed-over-taps MDA statistic for a batch.
template <typename T>
std::vector<double> mda_scores(const MdaModel& model, const std::vector<Tensor<T>>& features) {
    const Tensor<double> per_tap = mda_tap_scores(model, features);
    std::vector<double> out(per_tap.rows(), 0.0);
    for (std::size_t i = 0; i < per_tap.rows(); ++i)
        for (std::size_t t = 0; t < per_tap.cols(); ++t) out[i] += per_tap(i, t);
    return out;
}

inline constexpr int kMdaSchemaVersion = 1;

inline void save_mda(const std::string& path, const MdaModel& model) {
    model.check();
    NamedTensors archive;
    for (std::size_t t = 0; t < model.taps.size(); ++t) {
        archive.add("tap_" + std::to_string(model.taps[t]) + "_means", model.means[t]);
        archive.add("tap_" + std::to_string(model.taps[t]) + "_chol", model.chol[t]);
    }
    save_archive(path, archive);

    nlohmann::ordered_json meta;
    meta["schema_version"] = kMdaSchemaVersion;
    meta["taps"] = model.taps;
    meta["classes"] = model.classes;
    meta["lambdas"] = model.lambdas;
    std::ofstream os(path + ".json");
    if (!os) throw FormatError("cannot write mda sidecar \"" + path + ".json\"");
    os << meta.dump(2) << "\n";
}

inline MdaModel load_mda(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw FormatError("missing mda sidecar \"" + path + ".json\"");
    nlohmann::json meta = nlohmann::json::parse(is);
    const int version = meta.value("schema_version", -1);
    if (version != kMdaSchemaVersion)
        throw FormatError("mda schema version mismatch: expected " +
                          std::to_string(kMdaSchemaVersion) + ", found " +
                          std::to_string(version));

    MdaModel model;
    model.taps = meta.at("taps").get<std::vector<int>>();
    model.classes = meta.at("classes").get<int>();
    model.lambdas = meta.at("lambdas").get<std::vector<double>>();
    const NamedTensors archive = load_archive(path);
    for (int tap : model.taps) {
        model.means.push_back(archive.get<double>("tap_" + std::to_string(tap) + "_means"));
        model.chol.push_back(archive.get<double>("tap_" + std::to_string(tap) + "_chol"));
    }
    model.check();
    return model;
}

/// Logistic regression over z-scored per-tap scores; the trained variant
/// of each baseline. Full-batch gradient descent, deterministic.
class LogisticCombiner {
public:
    void fit(const Tensor<double>& features, const std::vector<char>& labels, int iters = 400,
             double lr = 0.5) {
        require(features.rank() == 2 && features.rows() == labels.size(),
                "combiner: feature/label mismatch");
        require(iters >= 1 && lr > 0, "combiner: bad iters/lr");
        const std::size_t n = features.rows(), m = features.cols();
        mean_.assign(m, 0.0);
        std_.assign(m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) mean_[j] += features(i, j);
        for (auto& v : mean_) v /= double(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double c = features(i, j) - mean_[j];
                std_[j] += c * c;
            }
        for (auto& v : std_) v = std::sqrt(v / double(n));
        for (auto& v : std_)
            if (v == 0) v = 1; // constant feature: no information, no blowup

        weights_.assign(m, 0.0);
        bias_ = 0;
        std::vector<double> z(m);
        for (int it = 0; it < iters; ++it) {
            std::vector<double> gw(m, 0.0);
            double gb = 0;
            for (std::size_t i = 0; i < n; ++i) {
                double dot = bias_;
                for (std::size_t j = 0; j < m; ++j) {
                    z[j] = (features(i, j) - mean_[j]) / std_[j];
                    dot += weights_[j] * z[j];
                }
                const double p = 1.0 / (1.0 + std::exp(-dot));
                const double err = p - (labels[i] ? 1.0 : 0.0);
                for (std::size_t j = 0; j < m; ++j) gw[j] += err * z[j];
                gb += err;
            }
            for (std::size_t j = 0; j < m; ++j) weights_[j] -= lr * gw[j] / double(n);
            bias_ -= lr * gb / double(n);
        }
    }

    double score(const double* row, std::size_t m) const {
        require(m == weights_.size(), "combiner: feature width mismatch");
        double dot = bias_;
        for (std::size_t j = 0; j < m; ++j)
            dot += weights_[j] * (row[j] - mean_[j]) / std_[j];
        return 1.0 / (1.0 + std::exp(-dot));
    }

    std::vector<double> score_rows(const Tensor<double>& features) const {
        std::vector<double> out(features.rows());
        for (std::size_t i = 0; i < features.rows(); ++i)
            out[i] = score(features.row(i), features.cols());
        return out;
    }

    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }

private:
    std::vector<double> weights_;
    double bias_ = 0;
    std::vector<double> mean_, std_;
};

/// LID per-tap feature matrix for a batch of contexts, ready for the
/// combiner.
inline Tensor<double> lid_feature_matrix(const std::vector<NeighborContext>& ctxs) {
    require(!ctxs.empty(), "lid: empty context list");
    const std::size_t taps = ctxs[0].taps.size();
    Tensor<double> out({ctxs.size(), taps});
    for (std::size_t i = 0; i < ctxs.size(); ++i) {
        const auto scores = lid_tap_scores(ctxs[i]);
        require(scores.size() == taps, "lid: context tap mismatch");
        for (std::size_t t = 0; t < taps; ++t) out(i, t) = scores[t];
    }
    return out;
}

} // namespace asds
