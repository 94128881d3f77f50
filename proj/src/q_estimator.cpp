#include "stfuse/q_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stfuse::qest {

void HistoricalArchive::add(int time_index, VectorXd image) {
    if (!entries_.empty()) {
        if (time_index <= entries_.back().time_index)
            throw ConfigError("archive time indices must be strictly increasing");
        if (image.size() != entries_.back().image.size()) {
            std::ostringstream msg;
            msg << "archive image at time " << time_index << " has length "
                << image.size() << ", expected " << entries_.back().image.size();
            throw ConfigError(msg.str());
        }
    }
    entries_.push_back({time_index, std::move(image)});
}

double cosine_similarity(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size())
        throw MetricError("cosine similarity inputs differ in length");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw MetricError("cosine similarity undefined for a zero-norm input");
    return a.dot(b) / (na * nb);
}

std::size_t most_similar_index(const VectorXd& query, const HistoricalArchive& archive) {
    if (archive.empty())
        throw EstimationError("cannot match against an empty historical archive");
    std::size_t best = 0;
    double best_sim = cosine_similarity(query, archive.at(0).image);
    for (std::size_t pos = 1; pos < archive.size(); ++pos) {
        const double sim = cosine_similarity(query, archive.at(pos).image);
        if (sim > best_sim) {  // strict: ties keep the earliest position
            best_sim = sim;
            best = pos;
        }
    }
    return best;
}

VectorXd estimate_q(const VectorXd& query, const HistoricalArchive& archive,
                    const QEstimatorConfig& config) {
    config.validate();
    const std::size_t match = most_similar_index(query, archive);
    const std::size_t last = std::min(match + static_cast<std::size_t>(config.window),
                                      archive.size() - 1);
    const std::size_t count = last - match + 1;

    const Eigen::Index dim = archive.at(match).image.size();
    VectorXd q = VectorXd::Constant(dim, config.variance_floor);
    if (count < 2) return q;  // window collapsed at the archive end: floor only

    VectorXd mean = VectorXd::Zero(dim);
    for (std::size_t pos = match; pos <= last; ++pos) mean += archive.at(pos).image;
    mean /= static_cast<double>(count);

    VectorXd ssq = VectorXd::Zero(dim);
    for (std::size_t pos = match; pos <= last; ++pos) {
        const VectorXd dev = archive.at(pos).image - mean;
        ssq += dev.cwiseProduct(dev);
    }
    const VectorXd var = ssq / static_cast<double>(count - 1);  // unbiased
    q = var.cwiseMax(config.variance_floor);
    return q;
}

}  // namespace stfuse::qest
