#include <doctest.h>

#include <random>

#include "stfuse/q_estimator.hpp"

using Eigen::VectorXd;
namespace qe = stfuse::qest;
using stfuse::ConfigError;
using stfuse::EstimationError;
using stfuse::MetricError;

TEST_CASE("cosine_similarity") {
    const VectorXd a = (VectorXd(2) << 1.0, 0.0).finished();
    const VectorXd b = (VectorXd(2) << 1.0, 1.0).finished();
    CHECK(qe::cosine_similarity(a, a) == doctest::Approx(1.0));
    CHECK(qe::cosine_similarity(a, (VectorXd(2) << 0.0, 1.0).finished()) ==
          doctest::Approx(0.0));
    CHECK(qe::cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK_THROWS_AS(qe::cosine_similarity(a, VectorXd::Zero(2)), MetricError);
    CHECK_THROWS_AS(qe::cosine_similarity(a, VectorXd::Ones(3)), MetricError);
}

namespace {

qe::HistoricalArchive make_archive(const std::vector<VectorXd>& images) {
    qe::HistoricalArchive a;
    int t = 0;
    for (const auto& img : images) a.add(t++, img);
    return a;
}

}  // namespace

TEST_CASE("most_similar_index") {
    SUBCASE("exact member is matched with similarity 1") {
        const auto archive = make_archive({(VectorXd(2) << 1.0, 0.0).finished(),
                                           (VectorXd(2) << 0.0, 1.0).finished(),
                                           (VectorXd(2) << 1.0, 1.0).finished()});
        CHECK(qe::most_similar_index((VectorXd(2) << 0.0, 1.0).finished(), archive) == 1);
    }
    SUBCASE("cosine matching is scale invariant") {
        const auto archive = make_archive({(VectorXd(3) << 1.0, 0.0, 0.0).finished(),
                                           (VectorXd(3) << 0.0, 1.0, 0.0).finished(),
                                           (VectorXd(3) << 0.0, 0.0, 1.0).finished()});
        const VectorXd query = 5.0 * (VectorXd(3) << 0.0, 0.0, 1.0).finished();
        CHECK(qe::most_similar_index(query, archive) == 2);
    }
    SUBCASE("query (1,1) against {(1,0),(2,2),(0,1)} -> position of (2,2)") {
        const auto archive = make_archive({(VectorXd(2) << 1.0, 0.0).finished(),
                                           (VectorXd(2) << 2.0, 2.0).finished(),
                                           (VectorXd(2) << 0.0, 1.0).finished()});
        CHECK(qe::most_similar_index((VectorXd(2) << 1.0, 1.0).finished(), archive) == 1);
    }
    SUBCASE("ties break toward the earliest position") {
        const auto archive = make_archive({(VectorXd(2) << 1.0, 0.0).finished(),
                                           (VectorXd(2) << 2.0, 0.0).finished()});
        CHECK(qe::most_similar_index((VectorXd(2) << 3.0, 0.0).finished(), archive) == 0);
    }
    SUBCASE("empty archive is an estimation error") {
        qe::HistoricalArchive empty;
        CHECK_THROWS_AS(qe::most_similar_index(VectorXd::Ones(2), empty), EstimationError);
    }
}

TEST_CASE("estimate_q") {
    qe::QEstimatorConfig cfg;
    cfg.window = 1;
    cfg.variance_floor = 1e-5;

    SUBCASE("identical archive images floor every component") {
        const auto archive = make_archive({VectorXd::Constant(4, 0.7),
                                           VectorXd::Constant(4, 0.7),
                                           VectorXd::Constant(4, 0.7)});
        const VectorXd q = qe::estimate_q(VectorXd::Constant(4, 0.7), archive, cfg);
        for (Eigen::Index i = 0; i < q.size(); ++i) CHECK(q[i] == 1e-5);
    }
    SUBCASE("two-image window with values {0,2} gives unbiased variance 2") {
        // Query matches the first entry; the d=1 window spans both.
        const auto archive = make_archive({(VectorXd(2) << 1.0, 0.0).finished(),
                                           (VectorXd(2) << 1.0, 2.0).finished()});
        const VectorXd q =
            qe::estimate_q((VectorXd(2) << 1.0, 0.0).finished(), archive, cfg);
        CHECK(q[0] == doctest::Approx(1e-5));   // constant component floored
        CHECK(q[1] == doctest::Approx(2.0));    // var({0,2}) with n-1 denominator
    }
    SUBCASE("match at the archive end collapses the window to the floor") {
        const auto archive = make_archive({(VectorXd(1) << 5.0).finished(),
                                           (VectorXd(1) << -1.0).finished()});
        const VectorXd q = qe::estimate_q((VectorXd(1) << -2.0).finished(), archive, cfg);
        CHECK(q[0] == 1e-5);
    }
    SUBCASE("window clamps at the archive end") {
        cfg.window = 10;
        const auto archive = make_archive({(VectorXd(1) << 1.0).finished(),
                                           (VectorXd(1) << 2.0).finished(),
                                           (VectorXd(1) << 3.0).finished()});
        const VectorXd q = qe::estimate_q((VectorXd(1) << 1.0).finished(), archive, cfg);
        CHECK(q[0] == doctest::Approx(1.0));  // var({1,2,3}) = 1
    }
    SUBCASE("invalid config rejected") {
        qe::QEstimatorConfig bad;
        bad.window = 0;
        const auto archive = make_archive({VectorXd::Ones(1), VectorXd::Ones(1)});
        CHECK_THROWS_AS(qe::estimate_q(VectorXd::Ones(1), archive, bad), ConfigError);
        bad.window = 1;
        bad.variance_floor = 0.0;
        CHECK_THROWS_AS(qe::estimate_q(VectorXd::Ones(1), archive, bad), ConfigError);
    }
}

TEST_CASE("estimate_q properties over random archives") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = 6;
        std::vector<VectorXd> images;
        for (int i = 0; i < 5; ++i) {
            VectorXd v(dim);
            for (int j = 0; j < dim; ++j) v[j] = unif(rng);
            images.push_back(v);
        }
        const auto archive = make_archive(images);
        VectorXd query(dim);
        for (int j = 0; j < dim; ++j) query[j] = unif(rng);

        qe::QEstimatorConfig cfg;
        cfg.window = 2;
        cfg.variance_floor = 1e-5;
        const VectorXd q = qe::estimate_q(query, archive, cfg);

        // Diagonal entries never fall below the floor.
        CHECK(q.minCoeff() >= cfg.variance_floor);

        // Matching is invariant to positive scaling of the query.
        CHECK(qe::most_similar_index(query, archive) ==
              qe::most_similar_index(3.7 * query, archive));

        // Raising the floor never lowers an entry.
        qe::QEstimatorConfig higher = cfg;
        higher.variance_floor = 1e-2;
        const VectorXd q2 = qe::estimate_q(query, archive, higher);
        for (Eigen::Index j = 0; j < q.size(); ++j) CHECK(q2[j] >= q[j]);

        // Bit-for-bit determinism.
        const VectorXd q3 = qe::estimate_q(query, archive, cfg);
        CHECK(q == q3);
    }
}

TEST_CASE("archive invariants") {
    qe::HistoricalArchive a;
    a.add(0, VectorXd::Ones(3));
    CHECK_THROWS_AS(a.add(0, VectorXd::Ones(3)), ConfigError);   // non-increasing time
    CHECK_THROWS_AS(a.add(5, VectorXd::Ones(4)), ConfigError);   // dimension change
    a.add(5, VectorXd::Zero(3));
    CHECK(a.size() == 2);
}
