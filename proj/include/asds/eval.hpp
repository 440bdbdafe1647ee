#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "asds/common.hpp"

namespace asds {

/// Area under the ROC curve for scores where larger means "more likely
/// positive". Computed as the Mann-Whitney statistic with an integer
/// numerator (2 per win, 1 per tie), so the result is bit-identical to
/// exhaustive pairwise counting, ties included.
inline double auroc(const std::vector<double>& negatives, const std::vector<double>& positives) {
    require(!negatives.empty() && !positives.empty(), "auroc: both classes must be nonempty");
    std::vector<double> sorted_neg = negatives;
    std::sort(sorted_neg.begin(), sorted_neg.end());
    std::uint64_t numerator2 = 0;
    for (double p : positives) {
        const auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), p);
        const auto hi = std::upper_bound(sorted_neg.begin(), sorted_neg.end(), p);
        const auto below = static_cast<std::uint64_t>(lo - sorted_neg.begin());
        const auto ties = static_cast<std::uint64_t>(hi - lo);
        numerator2 += 2 * below + ties;
    }
    return static_cast<double>(numerator2) /
           (2.0 * static_cast<double>(negatives.size()) * static_cast<double>(positives.size()));
}

/// Detection threshold for a target false-positive rate: samples scoring
/// strictly above the returned value are flagged, and at most
/// floor(fpr * n) negatives are.
inline double threshold_at_fpr(const std::vector<double>& negatives, double fpr) {
    require(!negatives.empty(), "threshold: need negative scores");
    require(fpr >= 0 && fpr < 1, "threshold: fpr must be in [0, 1)");
    std::vector<double> desc = negatives;
    std::sort(desc.begin(), desc.end(), std::greater<double>());
    const auto allowed = static_cast<std::size_t>(fpr * static_cast<double>(desc.size()));
    return desc[allowed];
}

/// Fraction of (successful) adversarial scores that slip under the
/// threshold, i.e. are not flagged.
inline double fooling_rate(const std::vector<double>& adversarial_scores, double threshold) {
    require(!adversarial_scores.empty(), "fooling_rate: need scores");
    std::size_t evaded = 0;
    for (double s : adversarial_scores) evaded += s <= threshold;
    return static_cast<double>(evaded) / static_cast<double>(adversarial_scores.size());
}

} // namespace asds
