#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/serialize.hpp"
#include "asds/target_model.hpp"
#include "asds/tensor.hpp"
#include "asds/threading.hpp"

namespace asds {

/// Labeled feature bank: deep features of a reference set at each tap,
/// the store neighbor retrieval runs against.
template <typename T>
struct QueryLibrary {
    std::vector<int> taps;               // tap numbers, ascending
    std::vector<Tensor<T>> features;     // one [n, d_tap] matrix per tap
    std::vector<int> labels;             // reference labels, length n
    int classes = 0;
    bool normalized = false;

    std::size_t size() const { return labels.size(); }

    void check() const {
        require(!taps.empty() && taps.size() == features.size(), "library: tap/feature mismatch");
        require(classes >= 2, "library: classes must be >= 2");
        for (const auto& f : features)
            require(f.rank() == 2 && f.rows() == labels.size(), "library: feature row mismatch");
    }
};

namespace detail {

template <typename T>
void l2_normalize_rows(Tensor<T>& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        T* row = m.row(i);
        double norm = 0;
        for (std::size_t j = 0; j < m.cols(); ++j) norm += double(row[j]) * row[j];
        norm = std::sqrt(norm);
        if (norm > 0)
            for (std::size_t j = 0; j < m.cols(); ++j) row[j] = static_cast<T>(row[j] / norm);
    }
}

} // namespace detail

/// Builds the library from a reference dataset by extracting features at
/// every requested tap. With normalize set, rows are L2-normalized (and
/// queries must be normalized the same way; retrieval handles that).
template <typename T>
QueryLibrary<T> build_library(const TargetModel<T>& model, const LabeledDataset<T>& reference,
                              const std::vector<int>& taps, bool normalize = false) {
    reference.check();
    require(!taps.empty(), "build_library: need at least one tap");
    for (std::size_t i = 1; i < taps.size(); ++i)
        require(taps[i] > taps[i - 1], "build_library: taps must be strictly ascending");

    QueryLibrary<T> lib;
    lib.taps = taps;
    lib.features = model.extract_features(reference.inputs, taps);
    lib.labels = reference.labels;
    lib.classes = reference.classes;
    lib.normalized = normalize;
    if (normalize)
        for (auto& f : lib.features) detail::l2_normalize_rows(f);
    lib.check();
    return lib;
}

/// Neighborhood of one query at one tap, re-ranked so position 0 is the
/// farthest of the k retained neighbors and the last is the closest.
struct TapNeighbors {
    std::vector<int> indices;        // into the library
    std::vector<double> distances;   // Euclidean, descending
    std::vector<int> labels;         // library labels of those neighbors
};

/// Neighborhoods of one query across all library taps, in tap order.
struct NeighborContext {
    std::vector<TapNeighbors> taps;
};

/// k nearest neighbors of `query` in `bank` by Euclidean distance
/// (selection ties go to the smaller index), then re-ranked in
/// descending distance order — again breaking exact ties by smaller
/// index — so the closest neighbor sits at the end of the sequence.
/// Pass exclude_index >= 0 to drop a known self-match.
template <typename T>
TapNeighbors knn_neighbors(const Tensor<T>& bank, const std::vector<int>& labels, const T* query,
                           std::size_t k, long exclude_index = -1) {
    const std::size_t n = bank.rows();
    const std::size_t available = n - (exclude_index >= 0 ? 1 : 0);
    require(k >= 1 && k <= available, "knn: k out of range for bank size");

    std::vector<std::pair<double, int>> scored;
    scored.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<long>(i) == exclude_index) continue;
        scored.emplace_back(euclidean(bank.row(i), query, bank.cols()), static_cast<int>(i));
    }
    const auto ascending = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
        return a.first != b.first ? a.first < b.first : a.second < b.second;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                      scored.end(), ascending);
    scored.resize(k);
    std::sort(scored.begin(), scored.end(),
              [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
                  return a.first != b.first ? a.first > b.first : a.second < b.second;
              });

    TapNeighbors out;
    out.indices.reserve(k);
    out.distances.reserve(k);
    out.labels.reserve(k);
    for (const auto& [dist, idx] : scored) {
        out.indices.push_back(idx);
        out.distances.push_back(dist);
        out.labels.push_back(labels[static_cast<std::size_t>(idx)]);
    }
    return out;
}

/// Retrieves the full cross-tap context for one query given its features
/// at each library tap (one single-row tensor per tap).
template <typename T>
NeighborContext retrieve_context(const QueryLibrary<T>& lib,
                                 const std::vector<Tensor<T>>& query_features, std::size_t k,
                                 long exclude_index = -1) {
    require(query_features.size() == lib.taps.size(), "retrieve: feature/tap count mismatch");
    NeighborContext ctx;
    for (std::size_t t = 0; t < lib.taps.size(); ++t) {
        require(query_features[t].numel() == lib.features[t].cols(),
                "retrieve: feature width mismatch");
        if (lib.normalized) {
            Tensor<T> q = query_features[t];
            detail::l2_normalize_rows(q);
            ctx.taps.push_back(knn_neighbors(lib.features[t], lib.labels, q.data(), k,
                                             exclude_index));
        } else {
            ctx.taps.push_back(knn_neighbors(lib.features[t], lib.labels,
                                             query_features[t].data(), k, exclude_index));
        }
    }
    return ctx;
}

/// Batch context retrieval for raw inputs: extracts features once, then
/// retrieves per-row contexts (parallel across rows when ASDS_THREADS
/// allows). exclude_self treats row i as library entry i.
template <typename T>
std::vector<NeighborContext> retrieve_contexts(const QueryLibrary<T>& lib,
                                               const TargetModel<T>& model, const Tensor<T>& inputs,
                                               std::size_t k, bool exclude_self = false) {
    if (exclude_self)
        require(inputs.rows() == lib.size(), "retrieve: exclude_self needs library-aligned rows");
    std::vector<Tensor<T>> feats = model.extract_features(inputs, lib.taps);
    if (lib.normalized)
        for (auto& f : feats) detail::l2_normalize_rows(f);

    std::vector<NeighborContext> out(inputs.rows());
    parallel_for(inputs.rows(), [&](std::size_t i) {
        NeighborContext ctx;
        for (std::size_t t = 0; t < lib.taps.size(); ++t)
            ctx.taps.push_back(knn_neighbors(lib.features[t], lib.labels, feats[t].row(i), k,
                                             exclude_self ? static_cast<long>(i) : -1));
        out[i] = std::move(ctx);
    });
    return out;
}

inline constexpr int kLibrarySchemaVersion = 1;

template <typename T>
void save_library(const std::string& path, const QueryLibrary<T>& lib) {
    lib.check();
    NamedTensors archive;
    for (std::size_t t = 0; t < lib.taps.size(); ++t)
        archive.add("tap_" + std::to_string(lib.taps[t]), lib.features[t]);
    Tensor<double> labels({lib.labels.size()});
    for (std::size_t i = 0; i < lib.labels.size(); ++i) labels[i] = lib.labels[i];
    archive.add("labels", labels);
    save_archive(path, archive);

    nlohmann::ordered_json meta;
    meta["schema_version"] = kLibrarySchemaVersion;
    meta["taps"] = lib.taps;
    meta["classes"] = lib.classes;
    meta["normalized"] = lib.normalized;
    meta["n"] = lib.size();
    std::ofstream os(path + ".json");
    if (!os) throw FormatError("cannot write library sidecar \"" + path + ".json\"");
    os << meta.dump(2) << "\n";
}

template <typename T = float>
QueryLibrary<T> load_library(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw FormatError("missing library sidecar \"" + path + ".json\"");
    nlohmann::json meta = nlohmann::json::parse(is);
    const int version = meta.value("schema_version", -1);
    if (version != kLibrarySchemaVersion)
        throw FormatError("library schema version mismatch: expected " +
                          std::to_string(kLibrarySchemaVersion) + ", found " +
                          std::to_string(version));

    QueryLibrary<T> lib;
    lib.taps = meta.at("taps").get<std::vector<int>>();
    lib.classes = meta.at("classes").get<int>();
    lib.normalized = meta.at("normalized").get<bool>();
    const NamedTensors archive = load_archive(path);
    for (int tap : lib.taps) lib.features.push_back(archive.get<T>("tap_" + std::to_string(tap)));
    const Tensor<double>& labels = archive.get<double>("labels");
    lib.labels.resize(labels.numel());
    for (std::size_t i = 0; i < labels.numel(); ++i) lib.labels[i] = static_cast<int>(labels[i]);
    lib.check();
    return lib;
}

} // namespace asds
