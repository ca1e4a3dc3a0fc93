#include "mhdsc/eval.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace mhdsc {

void RankedPredictions::validate() const
{
    if (scores.size() != relevance.size()) throw ValidationError("scores and relevance have different lengths");
    if (!scores.allFinite()) throw ValidationError("scores must be finite");
    for (Index i = 0; i < relevance.size(); ++i) {
        if (relevance(i) != 0.0 && relevance(i) != 1.0) throw ValidationError("relevance must be 0 or 1");
    }
}

double average_precision(const RankedPredictions& rp)
{
    rp.validate();
    const Index n = rp.scores.size();
    const auto npos = static_cast<long long>(rp.relevance.sum());
    if (npos == 0) throw ValidationError("average precision is undefined without relevant items");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return rp.scores(a) > rp.scores(b); });

    // best[i]: max precision over ranks whose recall tp/npos >= i/10.
    std::array<double, 11> best{};
    long long tp = 0;
    for (Index k = 0; k < n; ++k) {
        if (rp.relevance(order[static_cast<std::size_t>(k)]) == 1.0) ++tp;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        for (long long i = 0; i <= 10; ++i) {
            if (tp * 10 >= i * npos) best[static_cast<std::size_t>(i)] = std::max(best[static_cast<std::size_t>(i)], precision);
        }
    }
    long double sum = 0.0L;
    for (double b : best) sum += b;
    return static_cast<double>(sum / 11.0L);
}

double mean_ap(const std::vector<double>& aps)
{
    if (aps.empty()) throw ValidationError("mean AP of an empty list");
    long double sum = 0.0L;
    for (double a : aps) sum += a;
    return static_cast<double>(sum / static_cast<long double>(aps.size()));
}

std::vector<std::optional<double>> per_class_ap(const Matrix& scores, const Matrix& labels)
{
    if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
        throw ValidationError("scores are " + std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()) +
                              " but labels are " + std::to_string(labels.rows()) + "x" +
                              std::to_string(labels.cols()));
    }
    std::vector<std::optional<double>> out;
    for (Index c = 0; c < scores.rows(); ++c) {
        RankedPredictions rp{scores.row(c).transpose(), labels.row(c).transpose()};
        if (rp.relevance.sum() == 0.0) {
            rp.validate();
            out.emplace_back(std::nullopt);
        } else {
            out.emplace_back(average_precision(rp));
        }
    }
    return out;
}

} // namespace mhdsc
