#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/rng.hpp"
#include "asds/serialize.hpp"
#include "asds/tensor.hpp"

namespace asds {

enum class Family { GaussianMixture, TwoRings, HypercubeCorners };

inline std::string family_name(Family f) {
    switch (f) {
    case Family::GaussianMixture: return "gaussian_mixture";
    case Family::TwoRings: return "two_rings";
    case Family::HypercubeCorners: return "hypercube_corners";
    }
    return "?";
}

inline Family family_from(const std::string& s) {
    if (s == "gaussian_mixture") return Family::GaussianMixture;
    if (s == "two_rings") return Family::TwoRings;
    if (s == "hypercube_corners") return Family::HypercubeCorners;
    throw ArgumentError("unknown dataset family \"" + s + "\"");
}

/// Labeled point set plus the per-dimension clipping box attacks operate
/// in. Immutable after construction.
template <typename T>
struct LabeledDataset {
    Tensor<T> inputs;        // [n, dims]
    std::vector<int> labels; // in [0, classes)
    int classes = 0;
    Tensor<T> valid_lo;      // [dims]
    Tensor<T> valid_hi;      // [dims]

    std::string family = "unspecified";
    std::uint64_t seed = 0;
    double separation = 0;

    std::size_t size() const { return inputs.rows(); }
    std::size_t dims() const { return inputs.cols(); }

    void check() const {
        require(inputs.rank() == 2 && size() >= 1, "dataset: inputs must be a nonempty matrix");
        require(labels.size() == size(), "dataset: label count mismatch");
        require(classes >= 1, "dataset: classes must be positive");
        for (int y : labels)
            require(y >= 0 && y < classes, "dataset: label out of range");
        require(valid_lo.numel() == dims() && valid_hi.numel() == dims(),
                "dataset: valid_range length mismatch");
    }
};

namespace detail {

template <typename T>
void fit_valid_range(LabeledDataset<T>& ds) {
    const std::size_t d = ds.dims();
    ds.valid_lo = Tensor<T>({d});
    ds.valid_hi = Tensor<T>({d});
    for (std::size_t j = 0; j < d; ++j) {
        T lo = ds.inputs(0, j), hi = ds.inputs(0, j);
        for (std::size_t i = 1; i < ds.size(); ++i) {
            lo = std::min(lo, ds.inputs(i, j));
            hi = std::max(hi, ds.inputs(i, j));
        }
        ds.valid_lo[j] = lo;
        ds.valid_hi[j] = hi;
    }
}

/// Quasi-orthogonal unit directions: redraw while the new direction
/// overlaps an earlier one by more than 0.5 (capped, keeping the best).
inline std::vector<std::vector<double>> spread_directions(std::size_t count, std::size_t dims,
                                                          Rng& rng) {
    std::vector<std::vector<double>> dirs;
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> best;
        double best_overlap = 2.0;
        for (int attempt = 0; attempt < 200; ++attempt) {
            std::vector<double> v(dims);
            double norm = 0;
            for (auto& x : v) {
                x = rng.normal();
                norm += x * x;
            }
            norm = std::sqrt(norm);
            for (auto& x : v) x /= norm;
            double overlap = 0;
            for (const auto& u : dirs) {
                double dot = 0;
                for (std::size_t j = 0; j < dims; ++j) dot += u[j] * v[j];
                overlap = std::max(overlap, std::abs(dot));
            }
            if (overlap < best_overlap) {
                best_overlap = overlap;
                best = std::move(v);
            }
            if (best_overlap <= 0.5) break;
        }
        dirs.push_back(std::move(best));
    }
    return dirs;
}

} // namespace detail

/// Class means for the gaussian_mixture family: antipodal pairs of
/// spread unit directions scaled by `separation`, unit isotropic noise.
template <typename T>
std::vector<std::vector<double>> gaussian_mixture_means(std::size_t dims, int classes,
                                                        double separation, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t pairs = (static_cast<std::size_t>(classes) + 1) / 2;
    const auto dirs = detail::spread_directions(pairs, dims, rng);
    std::vector<std::vector<double>> means;
    for (int c = 0; c < classes; ++c) {
        const auto& dir = dirs[c / 2];
        const double sign = (c % 2 == 0) ? 1.0 : -1.0;
        std::vector<double> m(dims);
        for (std::size_t j = 0; j < dims; ++j) m[j] = sign * separation * dir[j];
        means.push_back(std::move(m));
    }
    return means;
}

/// Deterministic synthetic dataset. Labels are assigned round-robin, so
/// n == classes yields exactly one point per class.
template <typename T = float>
LabeledDataset<T> generate(Family family, std::size_t dims, int classes, std::size_t n,
                           std::uint64_t seed, double separation) {
    require(dims >= 2, "generate: dims must be >= 2");
    require(classes >= 2, "generate: classes must be >= 2");
    require(n >= static_cast<std::size_t>(classes), "generate: n must be >= classes");
    require(separation > 0, "generate: separation must be positive");

    LabeledDataset<T> ds;
    ds.inputs = Tensor<T>({n, dims});
    ds.labels.resize(n);
    ds.classes = classes;
    ds.family = family_name(family);
    ds.seed = seed;
    ds.separation = separation;

    Rng rng(seed);
    switch (family) {
    case Family::GaussianMixture: {
        const auto means = gaussian_mixture_means<T>(dims, classes, separation, seed);
        Rng noise = rng.child(1);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(i % classes);
            ds.labels[i] = c;
            for (std::size_t j = 0; j < dims; ++j)
                ds.inputs(i, j) = static_cast<T>(means[c][j] + noise.normal());
        }
        break;
    }
    case Family::TwoRings: {
        constexpr double kTau = 6.283185307179586;
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(i % classes);
            ds.labels[i] = c;
            const double radius = separation * (1.0 + c) + 0.08 * separation * rng.normal();
            const double angle = rng.uniform(0.0, kTau);
            ds.inputs(i, 0) = static_cast<T>(radius * std::cos(angle));
            ds.inputs(i, 1) = static_cast<T>(radius * std::sin(angle));
            for (std::size_t j = 2; j < dims; ++j)
                ds.inputs(i, j) = static_cast<T>(0.1 * rng.normal());
        }
        break;
    }
    case Family::HypercubeCorners: {
        require(dims < 30 ? static_cast<std::size_t>(classes) <= (std::size_t(1) << dims) : true,
                "generate: more classes than hypercube corners");
        std::vector<std::uint64_t> corners;
        while (corners.size() < static_cast<std::size_t>(classes)) {
            std::uint64_t bits = 0;
            for (std::size_t j = 0; j < dims && j < 62; ++j)
                bits |= (rng.next_u64() & 1u) << j;
            if (std::find(corners.begin(), corners.end(), bits) == corners.end())
                corners.push_back(bits);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(i % classes);
            ds.labels[i] = c;
            for (std::size_t j = 0; j < dims; ++j) {
                const double corner = (corners[c] >> std::min<std::size_t>(j, 61) & 1u) ? 1.0 : -1.0;
                ds.inputs(i, j) = static_cast<T>(0.5 * separation * corner + rng.normal());
            }
        }
        break;
    }
    }
    detail::fit_valid_range(ds);
    ds.check();
    return ds;
}

/// Disjoint index splits for target training, detector training, and
/// detector evaluation, drawn from one seeded shuffle.
struct SplitSpec {
    double target_fraction = 0.5;
    double detector_train_fraction = 0.25;
    double detector_eval_fraction = 0.25;
    std::uint64_t seed = 0;
};

struct Splits {
    std::vector<std::size_t> target_train;
    std::vector<std::size_t> detector_train;
    std::vector<std::size_t> detector_eval;
};

inline Splits make_splits(std::size_t n, const SplitSpec& spec) {
    require(spec.target_fraction > 0 && spec.detector_train_fraction > 0 &&
                spec.detector_eval_fraction > 0,
            "splits: fractions must be positive");
    require(spec.target_fraction + spec.detector_train_fraction + spec.detector_eval_fraction <=
                1.0 + 1e-12,
            "splits: fractions must sum to at most 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng(spec.seed);
    rng.shuffle(order);
    const auto take = [&](std::size_t& cursor, double fraction) {
        const auto count = static_cast<std::size_t>(fraction * static_cast<double>(n));
        std::vector<std::size_t> out(order.begin() + cursor, order.begin() + cursor + count);
        cursor += count;
        return out;
    };
    std::size_t cursor = 0;
    Splits s;
    s.target_train = take(cursor, spec.target_fraction);
    s.detector_train = take(cursor, spec.detector_train_fraction);
    s.detector_eval = take(cursor, spec.detector_eval_fraction);
    return s;
}

template <typename T>
LabeledDataset<T> subset(const LabeledDataset<T>& ds, const std::vector<std::size_t>& indices) {
    require(!indices.empty(), "subset: empty index list");
    LabeledDataset<T> out = ds;
    out.inputs = Tensor<T>({indices.size(), ds.dims()});
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] < ds.size(), "subset: index out of range");
        std::copy(ds.inputs.row(indices[i]), ds.inputs.row(indices[i]) + ds.dims(),
                  out.inputs.row(i));
        out.labels[i] = ds.labels[indices[i]];
    }
    return out;
}

inline constexpr int kDatasetSchemaVersion = 1;

template <typename T>
void save_dataset(const std::string& path, const LabeledDataset<T>& ds) {
    ds.check();
    NamedTensors archive;
    archive.add("inputs", ds.inputs);
    Tensor<double> labels({ds.labels.size()});
    for (std::size_t i = 0; i < ds.labels.size(); ++i) labels[i] = ds.labels[i];
    archive.add("labels", labels);
    archive.add("valid_lo", ds.valid_lo);
    archive.add("valid_hi", ds.valid_hi);
    save_archive(path, archive);

    nlohmann::ordered_json meta;
    meta["schema_version"] = kDatasetSchemaVersion;
    meta["family"] = ds.family;
    meta["dims"] = ds.dims();
    meta["classes"] = ds.classes;
    meta["n"] = ds.size();
    meta["seed"] = ds.seed;
    meta["separation"] = ds.separation;
    meta["valid_range"] = {std::vector<double>(ds.valid_lo.vec().begin(), ds.valid_lo.vec().end()),
                           std::vector<double>(ds.valid_hi.vec().begin(), ds.valid_hi.vec().end())};
    std::ofstream os(path + ".json");
    if (!os) throw FormatError("cannot write dataset sidecar \"" + path + ".json\"");
    os << meta.dump(2) << "\n";
}

template <typename T = float>
LabeledDataset<T> load_dataset(const std::string& path) {
    const NamedTensors archive = load_archive(path);
    std::ifstream is(path + ".json");
    if (!is) throw FormatError("missing dataset sidecar \"" + path + ".json\"");
    nlohmann::json meta = nlohmann::json::parse(is);
    const int version = meta.value("schema_version", -1);
    if (version != kDatasetSchemaVersion)
        throw FormatError("dataset schema version mismatch: expected " +
                          std::to_string(kDatasetSchemaVersion) + ", found " +
                          std::to_string(version));

    LabeledDataset<T> ds;
    ds.inputs = archive.get<T>("inputs");
    const Tensor<double>& labels = archive.get<double>("labels");
    ds.labels.resize(labels.numel());
    for (std::size_t i = 0; i < labels.numel(); ++i) ds.labels[i] = static_cast<int>(labels[i]);
    ds.valid_lo = archive.get<T>("valid_lo");
    ds.valid_hi = archive.get<T>("valid_hi");
    ds.classes = meta.at("classes").get<int>();
    ds.family = meta.at("family").get<std::string>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.separation = meta.at("separation").get<double>();
    ds.check();
    return ds;
}

} // namespace asds
