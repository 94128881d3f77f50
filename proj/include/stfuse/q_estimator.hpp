#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "stfuse/errors.hpp"

namespace stfuse::qest {

using Eigen::VectorXd;

/// Time-indexed set of past high-resolution images (band-major vectors).
class HistoricalArchive {
public:
    struct Entry {
        int time_index;
        VectorXd image;
    };

    void add(int time_index, VectorXd image);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const Entry& at(std::size_t pos) const { return entries_.at(pos); }
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;  // strictly increasing time indices
};

struct QEstimatorConfig {
    int window = 1;               // d: images after the match, window inclusive
    double variance_floor = 1e-5; // epsilon^2

    void validate() const {
        if (window < 1) throw ConfigError("q estimator window d must be >= 1");
        if (!(variance_floor > 0.0))
            throw ConfigError("q estimator variance floor must be > 0");
    }
};

/// <a,b> / (||a|| ||b||); rejects zero-norm inputs.
double cosine_similarity(const VectorXd& a, const VectorXd& b);

/// Archive position maximizing cosine similarity to the query;
/// ties break toward the earliest position.
std::size_t most_similar_index(const VectorXd& query, const HistoricalArchive& archive);

/// Diagonal of Q_k: per-component sample variance over the matched window
/// [l*, min(l*+d, last)], floored at variance_floor.
VectorXd estimate_q(const VectorXd& query, const HistoricalArchive& archive,
                    const QEstimatorConfig& config);

}  // namespace stfuse::qest
