#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "logitconf/confidence.hpp"
#include "logitconf/gaussian.hpp"
#include "oracles.hpp"

using namespace logitconf;

namespace {

// instance distribution shared by all randomized properties:
// C uniform in [2,20], means uniform in [-5,5], stds log-uniform in [0.05,5]
ClassGaussians random_instance(oracle::SimpleRng& rng, int min_c = 2, int max_c = 20) {
    const int c = min_c + static_cast<int>(rng.uniform() * (max_c - min_c + 1));
    std::vector<double> means(c), stds(c);
    const double log_lo = std::log(0.05), log_hi = std::log(5.0);
    for (int i = 0; i < c; ++i) {
        means[i] = -5.0 + 10.0 * rng.uniform();
        stds[i] = std::exp(log_lo + (log_hi - log_lo) * rng.uniform());
    }
    return ClassGaussians(std::move(means), std::move(stds));
}

} // namespace

TEST_CASE("select_winner: argmax with smallest-index ties", "[confidence]") {
    CHECK(select_winner(ClassGaussians({0.2, 1.5, -0.3}, {1, 1, 1})) == 1);
    CHECK(select_winner(ClassGaussians({1.0, 1.0}, {1, 1})) == 0);
    CHECK(select_winner(ClassGaussians({-5, -5, -4.999999}, {1, 1, 1})) == 2);
}

TEST_CASE("ClassGaussians rejects degenerate parameters", "[confidence]") {
    CHECK_THROWS_AS(ClassGaussians({0.0, 1.0}, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(ClassGaussians({0.0, 1.0}, {1.0, -2.0}), std::invalid_argument);
    CHECK_THROWS_AS(ClassGaussians({0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ClassGaussians({0.0, NAN}, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ClassGaussians({0.0, 1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("pairwise_win_prob: symmetry, pinned value, saturation", "[confidence]") {
    CHECK(pairwise_win_prob(0.7, 1.3, 0.7, 1.3) == 0.5);
    // frozen from the erf oracle: Phi(1/sqrt(2))
    const double p = pairwise_win_prob(1.0, 1.0, 0.0, 1.0);
    CHECK(p == Catch::Approx(0.76024993890652327).epsilon(0).margin(1e-12));
    CHECK(p == Catch::Approx(oracle::std_normal_cdf(1.0 / std::sqrt(2.0)))
                   .epsilon(0).margin(1e-12));
    CHECK(pairwise_win_prob(10.0, 0.1, 0.0, 0.1) == Catch::Approx(1.0).epsilon(0).margin(1e-12));
}

TEST_CASE("pairwise_win_prob agrees with joint sampling at N=1e7", "[confidence][heavy]") {
    const ClassGaussians g({1.0, 0.0}, {1.0, 1.0});
    const DeterministicStream s{2024, 0};
    const double freq = confidence_joint_sampling(g, 0, 10'000'000, s);
    CHECK(freq == Catch::Approx(0.76024993890652327).epsilon(0).margin(5e-4));
}

TEST_CASE("confidence_lower_bound: pinned examples", "[confidence]") {
    // all-symmetric C=3: both factors are exactly 0.5
    CHECK(confidence_lower_bound(ClassGaussians({0, 0, 0}, {1, 1, 1}), 0) == 0.25);
    // C=2 reduces to the closed form bit-exactly
    const ClassGaussians two({1.0, 0.0}, {1.0, 1.0});
    CHECK(confidence_lower_bound(two, 0) == pairwise_win_prob(1.0, 1.0, 0.0, 1.0));
    // frozen: Phi(sqrt(2))^2
    CHECK(confidence_lower_bound(ClassGaussians({2, 0, 0}, {1, 1, 1}), 0) ==
          Catch::Approx(0.84888655308437699).epsilon(0).margin(1e-12));
}

TEST_CASE("confidence_lower_bound: log-space fallback under deep underflow", "[confidence]") {
    // fixed-winner evaluation (the ensemble case) can make every factor tiny
    const ClassGaussians g({0.0, 50.0}, {1.0, 1.0});
    const double one_factor = confidence_lower_bound(g, 0);
    CHECK(one_factor > 0.0);
    CHECK(one_factor < 1e-250);
    const ClassGaussians g3({0.0, 50.0, 50.0}, {1.0, 1.0, 1.0});
    CHECK(confidence_lower_bound(g3, 0) == 0.0); // below the 1e-300 floor
}

TEST_CASE("confidence_quadrature: pinned examples", "[confidence]") {
    const QuadratureValue sym = confidence_quadrature(ClassGaussians({0, 0, 0}, {1, 1, 1}), 0);
    CHECK(sym.converged);
    CHECK(sym.value == Catch::Approx(1.0 / 3.0).epsilon(0).margin(1e-8));

    const QuadratureValue two = confidence_quadrature(ClassGaussians({1, 0}, {1, 1}), 0);
    CHECK(two.converged);
    CHECK(two.value == Catch::Approx(0.76024993890652327).epsilon(0).margin(1e-8));

    const QuadratureValue three = confidence_quadrature(ClassGaussians({2, 0, 0}, {1, 1, 1}), 0);
    CHECK(three.converged);
    CHECK(three.value >= 0.84888655308437699); // its own lower bound
    // frozen from 40-digit quadrature
    CHECK(three.value == Catch::Approx(0.86576717563483243).epsilon(0).margin(1e-8));
}

TEST_CASE("confidence_quadrature agrees with joint sampling at N=1e7", "[confidence][heavy]") {
    const ClassGaussians g({2, 0, 0}, {1, 1, 1});
    const QuadratureValue q = confidence_quadrature(g, 0);
    const DeterministicStream s{555, 0};
    const double freq = confidence_joint_sampling(g, 0, 10'000'000, s);
    CHECK(q.value == Catch::Approx(freq).epsilon(0).margin(1e-3));
}

TEST_CASE("confidence_quadrature: reports non-convergence at the node cap", "[confidence]") {
    QuadratureOptions opt;
    opt.node_cap = 64; // force the cap; the default cap converges here
    const ClassGaussians g({2, 0, 0}, {1, 1, 1});
    const QuadratureValue q = win_prob_quadrature(g.means, g.stds, 0, opt);
    CHECK_FALSE(q.converged);
    CHECK(q.value == Catch::Approx(0.86576717563483243).epsilon(1e-3));
}

TEST_CASE("confidence_mc: saturation, symmetric value, determinism", "[confidence]") {
    const ClassGaussians dominant({100.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    const DeterministicStream s{11, 0};
    for (uint64_t n : {uint64_t{1}, uint64_t{10}, uint64_t{1000}})
        CHECK(confidence_mc(dominant, 0, n, s) == Catch::Approx(1.0).epsilon(0).margin(1e-9));

    const ClassGaussians sym({0, 0, 0}, {1, 1, 1});
    const double est = confidence_mc(sym, 0, 1'000'000, DeterministicStream{77, 0});
    CHECK(est == Catch::Approx(1.0 / 3.0).epsilon(0).margin(0.0015));

    const double a = confidence_mc(sym, 0, 10'000, DeterministicStream{5, 9});
    const double b = confidence_mc(sym, 0, 10'000, DeterministicStream{5, 9});
    CHECK(a == b);
}

TEST_CASE("confidence_joint_sampling: examples", "[confidence]") {
    const ClassGaussians dominant({100.0, 0.0}, {1.0, 1.0});
    CHECK(confidence_joint_sampling(dominant, 0, 1000, DeterministicStream{1, 0}) == 1.0);

    const ClassGaussians two({1.0, 0.0}, {1.0, 1.0});
    const double freq = confidence_joint_sampling(two, 0, 1'000'000, DeterministicStream{3, 0});
    CHECK(freq == Catch::Approx(0.76024993890652327).epsilon(0).margin(0.0013));

    const ClassGaussians sym({0.0, 0.0}, {1.0, 1.0});
    const double single = confidence_joint_sampling(sym, 0, 1, DeterministicStream{8, 0});
    CHECK((single == 0.0 || single == 1.0));
}

TEST_CASE("softmax_avg_probs: degenerate noise, symmetry, normalization", "[confidence]") {
    const ClassGaussians tiny({1.0, -0.5, 0.2}, {1e-8, 1e-8, 1e-8});
    const auto probs = softmax_avg_probs(tiny, 64, DeterministicStream{4, 0});
    // softmax of the means directly
    double norm = std::exp(1.0) + std::exp(-0.5) + std::exp(0.2);
    CHECK(probs[0] == Catch::Approx(std::exp(1.0) / norm).epsilon(0).margin(1e-6));
    CHECK(probs[1] == Catch::Approx(std::exp(-0.5) / norm).epsilon(0).margin(1e-6));
    CHECK(probs[2] == Catch::Approx(std::exp(0.2) / norm).epsilon(0).margin(1e-6));

    const ClassGaussians sym({0.7, 0.7, 0.7}, {1.3, 1.3, 1.3});
    const auto p = softmax_avg_probs(sym, 1'000'000, DeterministicStream{21, 0});
    for (double v : p) CHECK(v == Catch::Approx(1.0 / 3.0).epsilon(0).margin(0.003));

    oracle::SimpleRng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const ClassGaussians g = random_instance(rng, 2, 12);
        const auto probs_t = softmax_avg_probs(g, 100, DeterministicStream{uint64_t(trial), 0});
        double sum = 0.0;
        for (double v : probs_t) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(sum == Catch::Approx(1.0).epsilon(0).margin(1e-12));
    }
}

TEST_CASE("win_prob_all_classes: symmetry, closed form, sum-to-one", "[confidence]") {
    const auto sym = win_prob_all_classes(ClassGaussians({0, 0, 0}, {1, 1, 1}));
    CHECK(sym.nonconverged == 0);
    for (double v : sym.probs) CHECK(v == Catch::Approx(1.0 / 3.0).epsilon(0).margin(1e-6));

    const auto two = win_prob_all_classes(ClassGaussians({1.0, 0.0}, {1.0, 1.0}));
    CHECK(two.probs[0] == Catch::Approx(0.76024993890652327).epsilon(0).margin(1e-8));
    CHECK(two.probs[1] == Catch::Approx(1.0 - 0.76024993890652327).epsilon(0).margin(1e-8));

    oracle::SimpleRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const ClassGaussians g = random_instance(rng, 2, 8);
        const auto all = win_prob_all_classes(g);
        double sum = 0.0;
        for (double v : all.probs) sum += v;
        CHECK(sum == Catch::Approx(1.0).epsilon(0).margin(1e-6));
    }
}

TEST_CASE("bound property on random instances", "[confidence][property]") {
    oracle::SimpleRng rng(2718);
    for (int trial = 0; trial < 1000; ++trial) {
        const ClassGaussians g = random_instance(rng);
        const size_t w = select_winner(g);
        const double lb = confidence_lower_bound(g, w);
        const QuadratureValue q = confidence_quadrature(g, w);
        REQUIRE(q.converged);
        REQUIRE(lb <= q.value + 1e-7);
        REQUIRE(lb > 0.0);
        REQUIRE(lb <= 1.0);
    }
}

TEST_CASE("two-class exactness on random instances", "[confidence][property]") {
    oracle::SimpleRng rng(31415);
    for (int trial = 0; trial < 2000; ++trial) {
        const ClassGaussians g = random_instance(rng, 2, 2);
        const size_t w = select_winner(g);
        const size_t j = 1 - w;
        const double lb = confidence_lower_bound(g, w);
        REQUIRE(lb == pairwise_win_prob(g.means[w], g.stds[w], g.means[j], g.stds[j]));
        const QuadratureValue q = confidence_quadrature(g, w);
        REQUIRE(std::abs(lb - q.value) <= 1e-8);
    }
}

TEST_CASE("MC and joint sampling agree with quadrature", "[confidence][property]") {
    oracle::SimpleRng rng(999);
    const uint64_t n = 100000;
    const double bound = 5.0 * 0.5 / std::sqrt(double(n)); // 5-sigma, term variance <= 1/4
    for (int trial = 0; trial < 20; ++trial) {
        const ClassGaussians g = random_instance(rng, 2, 10);
        const size_t w = select_winner(g);
        const QuadratureValue q = confidence_quadrature(g, w);
        const DeterministicStream s{uint64_t(1000 + trial), 0};
        REQUIRE(std::abs(confidence_mc(g, w, n, s) - q.value) <= bound);
        REQUIRE(std::abs(confidence_joint_sampling(g, w, n, s) - q.value) <= bound);
    }
}

TEST_CASE("monotonicity in the winner and challenger means", "[confidence][property]") {
    oracle::SimpleRng rng(5150);
    for (int trial = 0; trial < 60; ++trial) {
        ClassGaussians g = random_instance(rng, 2, 8);
        const size_t w = select_winner(g);
        const double lb = confidence_lower_bound(g, w);
        const double quad = confidence_quadrature(g, w).value;

        std::vector<double> raised = g.means;
        raised[w] += 0.5;
        REQUIRE(confidence_lower_bound(raised, g.stds, w) >= lb);
        REQUIRE(win_prob_quadrature(raised, g.stds, w).value >= quad - 1e-9);

        // raising any challenger (while keeping the winner the argmax)
        for (size_t j = 0; j < g.classes(); ++j) {
            if (j == w) continue;
            std::vector<double> challenger = g.means;
            challenger[j] = std::min(challenger[j] + 0.3, challenger[w]);
            REQUIRE(confidence_lower_bound(challenger, g.stds, w) <= lb);
            REQUIRE(win_prob_quadrature(challenger, g.stds, w).value <= quad + 1e-9);
        }
    }
}

TEST_CASE("shift invariance of all estimators", "[confidence][property]") {
    oracle::SimpleRng rng(86);
    for (int trial = 0; trial < 30; ++trial) {
        const ClassGaussians g = random_instance(rng, 2, 8);
        const double shift = -3.0 + 6.0 * rng.uniform();
        std::vector<double> shifted = g.means;
        for (double& m : shifted) m += shift;
        const size_t w = select_winner(g);
        REQUIRE(select_winner(std::span<const double>(shifted)) == w);

        // the closed forms subtract means first: bit-exact under a common shift
        REQUIRE(confidence_lower_bound(shifted, g.stds, w) == confidence_lower_bound(g, w));

        REQUIRE(win_prob_quadrature(shifted, g.stds, w).value ==
                Catch::Approx(confidence_quadrature(g, w).value).epsilon(0).margin(1e-9));
        const DeterministicStream s{uint64_t(trial), 3};
        REQUIRE(confidence_mc(shifted, g.stds, w, 2000, s) ==
                Catch::Approx(confidence_mc(g, w, 2000, s)).epsilon(0).margin(1e-9));
        REQUIRE(confidence_joint_sampling(shifted, g.stds, w, 2000, s) ==
                Catch::Approx(confidence_joint_sampling(g, w, 2000, s)).epsilon(0).margin(1e-9));

        std::vector<double> p_shift(g.classes()), p_base(g.classes());
        softmax_avg_probs(shifted, g.stds, 500, s, p_shift);
        softmax_avg_probs(g.means, g.stds, 500, s, p_base);
        for (size_t i = 0; i < g.classes(); ++i)
            REQUIRE(p_shift[i] == Catch::Approx(p_base[i]).epsilon(0).margin(1e-9));
    }
}

TEST_CASE("field_confidence: singleton field reduces to per-sample ops", "[confidence]") {
    const ClassGaussians g({1.2, 0.3, -0.4}, {0.9, 1.1, 0.5});
    GaussianField f(1, 1, 3, g.means, g.stds);
    const size_t w = select_winner(g);

    EstimatorConfig cfg;
    cfg.seed = 42;
    cfg.method = Method::LowerBound;
    CHECK(field_confidence(f, cfg).conf[0] == confidence_lower_bound(g, w));

    cfg.method = Method::Quadrature;
    CHECK(field_confidence(f, cfg).conf[0] == confidence_quadrature(g, w).value);

    cfg.method = Method::McIntegration;
    cfg.sample_count = 5000;
    CHECK(field_confidence(f, cfg).conf[0] ==
          confidence_mc(g, w, 5000, DeterministicStream{42, 0}));

    cfg.method = Method::JointSampling;
    CHECK(field_confidence(f, cfg).conf[0] ==
          confidence_joint_sampling(g, w, 5000, DeterministicStream{42, 0}));

    cfg.method = Method::SoftmaxAvg;
    cfg.sample_count = 200;
    CHECK(field_confidence(f, cfg).conf[0] ==
          softmax_avg_probs(g, 200, DeterministicStream{42, 0})[w]);
}

TEST_CASE("field_confidence: thread count never changes the output", "[confidence]") {
    oracle::SimpleRng rng(1234);
    const uint32_t h = 8, w = 16, c = 5;
    std::vector<double> means(h * w * c), stds(h * w * c);
    for (auto& m : means) m = -5.0 + 10.0 * rng.uniform();
    for (auto& s : stds) s = std::exp(std::log(0.05) + rng.uniform() * std::log(100.0));
    const GaussianField f(h, w, c, means, stds);

    for (Method method : {Method::LowerBound, Method::Quadrature, Method::McIntegration,
                          Method::JointSampling, Method::SoftmaxAvg}) {
        EstimatorConfig cfg;
        cfg.method = method;
        cfg.sample_count = 300;
        cfg.seed = 99;
        const FieldResult serial = field_confidence(f, cfg, 1);
        const FieldResult parallel = field_confidence(f, cfg, 7);
        REQUIRE(serial.pred == parallel.pred);
        REQUIRE(serial.conf == parallel.conf);
        REQUIRE(serial.unc == parallel.unc);
    }
}

TEST_CASE("field_confidence: dominant winners give near-zero uncertainty", "[confidence]") {
    const uint32_t n = 32;
    std::vector<double> means(n * 2), stds(n * 2, 0.5);
    for (uint32_t i = 0; i < n; ++i) {
        means[2 * i] = 100.0;
        means[2 * i + 1] = 0.0;
    }
    const GaussianField f(1, n, 2, means, stds);
    EstimatorConfig cfg;
    cfg.method = Method::LowerBound;
    const FieldResult r = field_confidence(f, cfg);
    for (uint32_t i = 0; i < n; ++i) {
        CHECK(r.pred[i] == 0);
        CHECK(r.unc[i] < 1e-9);
    }
}

TEST_CASE("field_confidence: shared pool mode stays deterministic", "[confidence]") {
    oracle::SimpleRng rng(777);
    const uint32_t n = 16, c = 4;
    std::vector<double> means(n * c), stds(n * c);
    for (auto& m : means) m = -2.0 + 4.0 * rng.uniform();
    for (auto& s : stds) s = 0.3 + rng.uniform();
    const GaussianField f(1, n, c, means, stds);
    EstimatorConfig cfg;
    cfg.method = Method::SoftmaxAvg;
    cfg.sample_count = 128;
    cfg.seed = 5;
    cfg.reuse_sample_pool = true;
    const FieldResult a = field_confidence(f, cfg, 1);
    const FieldResult b = field_confidence(f, cfg, 4);
    REQUIRE(a.conf == b.conf);
    // pooled and per-pixel draws estimate the same quantity
    cfg.reuse_sample_pool = false;
    const FieldResult fresh = field_confidence(f, cfg, 1);
    for (uint32_t i = 0; i < n; ++i)
        CHECK(a.conf[i] == Catch::Approx(fresh.conf[i]).epsilon(0).margin(0.25));
}
