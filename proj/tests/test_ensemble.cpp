#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "logitconf/ensemble.hpp"
#include "oracles.hpp"

using namespace logitconf;

namespace {

GaussianField random_field(oracle::SimpleRng& rng, uint32_t h, uint32_t w, uint32_t c) {
    std::vector<double> means(uint64_t(h) * w * c), stds(means.size());
    for (auto& m : means) m = -3.0 + 6.0 * rng.uniform();
    for (auto& s : stds) s = 0.2 + 2.0 * rng.uniform();
    return GaussianField(h, w, c, std::move(means), std::move(stds));
}

} // namespace

TEST_CASE("ensemble_predict", "[ensemble]") {
    oracle::SimpleRng rng(808);
    SECTION("single member reduces to per-pixel argmax") {
        EnsembleField e;
        e.members.push_back(random_field(rng, 2, 3, 4));
        const auto pred = ensemble_predict(e);
        for (uint64_t p = 0; p < e.members[0].pixels(); ++p)
            CHECK(pred[p] == select_winner(e.members[0].means_at(p)));
    }
    SECTION("identical members match a single member") {
        EnsembleField one, three;
        const GaussianField f = random_field(rng, 2, 2, 3);
        one.members = {f};
        three.members = {f, f, f};
        CHECK(ensemble_predict(one) == ensemble_predict(three));
    }
    SECTION("hand-built two-member, two-class case") {
        // averaged means: class0 = (1.0 + 0.0)/2 = 0.5, class1 = (0.2 + 0.6)/2 = 0.4
        EnsembleField e;
        e.members.push_back(GaussianField(1, 1, 2, {1.0, 0.2}, {1, 1}));
        e.members.push_back(GaussianField(1, 1, 2, {0.0, 0.6}, {1, 1}));
        CHECK(ensemble_predict(e)[0] == 0);
        // member 1 alone would pick class 1
        EnsembleField solo;
        solo.members = {e.members[1]};
        CHECK(ensemble_predict(solo)[0] == 1);
    }
    SECTION("argmax ties resolve to the smallest index") {
        EnsembleField e;
        e.members.push_back(GaussianField(1, 1, 2, {0.5, 0.5}, {1, 1}));
        CHECK(ensemble_predict(e)[0] == 0);
    }
}

TEST_CASE("ensemble_confidence: single member equals field_confidence", "[ensemble]") {
    oracle::SimpleRng rng(33);
    EnsembleField e;
    e.members.push_back(random_field(rng, 2, 4, 3));
    for (Method method : {Method::LowerBound, Method::Quadrature, Method::McIntegration,
                          Method::JointSampling, Method::SoftmaxAvg}) {
        EstimatorConfig cfg;
        cfg.method = method;
        cfg.sample_count = 200;
        cfg.seed = 4;
        const FieldResult ens = ensemble_confidence(e, cfg);
        const FieldResult single = field_confidence(e.members[0], cfg);
        REQUIRE(ens.pred == single.pred);
        REQUIRE(ens.conf == single.conf);
    }
}

TEST_CASE("ensemble_confidence: duplicated members change nothing", "[ensemble]") {
    oracle::SimpleRng rng(1717);
    const GaussianField a = random_field(rng, 1, 8, 4);
    const GaussianField b = random_field(rng, 1, 8, 4);
    EnsembleField two, four;
    two.members = {a, b};
    four.members = {a, a, b, b};
    for (Method method : {Method::LowerBound, Method::McIntegration, Method::SoftmaxAvg}) {
        EstimatorConfig cfg;
        cfg.method = method;
        cfg.sample_count = 100;
        cfg.seed = 9;
        const FieldResult r2 = ensemble_confidence(two, cfg);
        const FieldResult r4 = ensemble_confidence(four, cfg);
        REQUIRE(r2.pred == r4.pred);
        REQUIRE(r2.conf == r4.conf);
    }
}

TEST_CASE("ensemble_confidence: member order never matters", "[ensemble]") {
    oracle::SimpleRng rng(2552);
    const GaussianField a = random_field(rng, 1, 6, 3);
    const GaussianField b = random_field(rng, 1, 6, 3);
    const GaussianField c = random_field(rng, 1, 6, 3);
    EnsembleField abc, cba;
    abc.members = {a, b, c};
    cba.members = {c, b, a};
    for (Method method : {Method::LowerBound, Method::JointSampling, Method::SoftmaxAvg}) {
        EstimatorConfig cfg;
        cfg.method = method;
        cfg.sample_count = 150;
        cfg.seed = 2;
        const FieldResult x = ensemble_confidence(abc, cfg);
        const FieldResult y = ensemble_confidence(cba, cfg);
        REQUIRE(x.pred == y.pred);
        REQUIRE(x.conf == y.conf);
    }
}

TEST_CASE("ensemble_confidence: identical members reproduce the member exactly", "[ensemble]") {
    oracle::SimpleRng rng(64);
    const GaussianField f = random_field(rng, 1, 10, 3);
    EstimatorConfig cfg;
    cfg.method = Method::LowerBound;
    const FieldResult single = field_confidence(f, cfg);
    for (size_t e_count : {2, 3, 4, 5}) {
        EnsembleField e;
        for (size_t i = 0; i < e_count; ++i) e.members.push_back(f);
        const FieldResult r = ensemble_confidence(e, cfg);
        REQUIRE(r.conf == single.conf);
    }
}

TEST_CASE("ensemble_confidence: two members average their confidences", "[ensemble]") {
    // member confidences engineered to 0.9 and 0.7 via the two-class closed
    // form: delta = Phi^-1(p) * sqrt(2) with unit stds
    const double d9 = 1.2815515655446004 * std::sqrt(2.0);
    const double d7 = 0.52440051270804067 * std::sqrt(2.0);
    EnsembleField e;
    e.members.push_back(GaussianField(1, 1, 2, {d9, 0.0}, {1, 1}));
    e.members.push_back(GaussianField(1, 1, 2, {d7, 0.0}, {1, 1}));
    EstimatorConfig cfg;
    cfg.method = Method::LowerBound;
    const FieldResult r = ensemble_confidence(e, cfg);
    CHECK(r.conf[0] == Catch::Approx(0.8).epsilon(0).margin(1e-9));

    const double c0 = field_confidence(e.members[0], cfg).conf[0];
    const double c1 = field_confidence(e.members[1], cfg).conf[0];
    CHECK(r.conf[0] == (c0 + c1) / 2.0);
    CHECK(r.unc[0] == 1.0 - r.conf[0]);
}

TEST_CASE("ensemble confidence stays inside the member range", "[ensemble][property]") {
    oracle::SimpleRng rng(90210);
    EnsembleField e;
    for (int m = 0; m < 5; ++m) e.members.push_back(random_field(rng, 1, 12, 4));
    EstimatorConfig cfg;
    cfg.method = Method::LowerBound;
    const FieldResult ens = ensemble_confidence(e, cfg);
    std::vector<FieldResult> singles;
    for (const auto& m : e.members) {
        GaussianField f = m;
        singles.push_back(field_confidence(f, cfg));
    }
    for (uint64_t p = 0; p < e.members[0].pixels(); ++p) {
        // members score the ensemble class, not their own argmax
        double lo = 1.0, hi = 0.0;
        for (const auto& m : e.members) {
            const double c = confidence_lower_bound(m.means_at(p), m.stds_at(p), ens.pred[p]);
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        CHECK(ens.conf[p] >= lo - 1e-12);
        CHECK(ens.conf[p] <= hi + 1e-12);
    }
}

TEST_CASE("lower-bound ensemble is bounded by mean member quadrature", "[ensemble][property]") {
    oracle::SimpleRng rng(420);
    EnsembleField e;
    for (int m = 0; m < 3; ++m) e.members.push_back(random_field(rng, 1, 10, 4));
    EstimatorConfig cfg;
    cfg.method = Method::LowerBound;
    const FieldResult ens = ensemble_confidence(e, cfg);
    for (uint64_t p = 0; p < e.members[0].pixels(); ++p) {
        double quad_mean = 0.0;
        for (const auto& m : e.members)
            quad_mean += win_prob_quadrature(m.means_at(p), m.stds_at(p), ens.pred[p]).value;
        quad_mean /= static_cast<double>(e.members.size());
        REQUIRE(ens.conf[p] <= quad_mean + 1e-7);
    }
}

TEST_CASE("ensemble member shape mismatch throws", "[ensemble]") {
    oracle::SimpleRng rng(5);
    EnsembleField e;
    e.members.push_back(random_field(rng, 1, 4, 3));
    e.members.push_back(random_field(rng, 1, 4, 4));
    EstimatorConfig cfg;
    CHECK_THROWS_AS(ensemble_confidence(e, cfg), std::invalid_argument);
}
