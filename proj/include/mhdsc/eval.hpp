#pragma once

#include "mhdsc/common.hpp"

#include <optional>
#include <vector>

namespace mhdsc {

struct RankedPredictions
{
    Vector scores;
    Vector relevance;  // 0/1 per item

    void validate() const;
};

/// 11-point interpolated average precision. Items are ranked by descending
/// score with ties going to the lower index; recall thresholds are compared
/// as exact fractions.
double average_precision(const RankedPredictions& rp);

double mean_ap(const std::vector<double>& aps);

/// AP of every class (row) of `scores` against `labels` (same shape);
/// std::nullopt for classes without positives.
std::vector<std::optional<double>> per_class_ap(const Matrix& scores, const Matrix& labels);

} // namespace mhdsc
