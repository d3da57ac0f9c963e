#include <catch2/catch_amalgamated.hpp>

#include "logitconf/bench.hpp"

using namespace logitconf;

TEST_CASE("random_bench_field is deterministic and valid", "[bench]") {
    const GaussianField a = random_bench_field(5, 128, 9);
    const GaussianField b = random_bench_field(5, 128, 9);
    CHECK(a.means == b.means);
    CHECK(a.stds == b.stds);
    a.validate();
    for (double s : a.stds) {
        CHECK(s >= 0.05 * 0.999);
        CHECK(s <= 5.0 * 1.001);
    }
}

TEST_CASE("run_bench produces medians, speedups and a stable digest", "[bench]") {
    BenchSpec spec;
    spec.classes = 4;
    spec.pixels = 256;
    spec.sample_count = 16;
    spec.repeats = 5;
    spec.warmup = 1;
    spec.seed = 3;
    const auto results = run_bench(spec);
    REQUIRE(results.size() == 2);
    for (const auto& r : results) {
        CHECK(r.times_seconds.size() == 5);
        CHECK(r.median_seconds > 0.0);
        CHECK(r.mean_confidence > 0.0);
        CHECK(r.mean_confidence <= 1.0);
    }
    CHECK(results[1].method == "softmax-avg");
    CHECK(results[1].speedup_vs_reference == Catch::Approx(1.0));

    // numerical outputs are a pure function of the seed; times are not
    const auto again = run_bench(spec);
    CHECK(results[0].mean_confidence == again[0].mean_confidence);
    CHECK(results[1].mean_confidence == again[1].mean_confidence);
}

TEST_CASE("run_bench validates its spec", "[bench]") {
    BenchSpec spec;
    spec.repeats = 3; // median needs at least 5 repeats
    CHECK_THROWS_AS(run_bench(spec), std::invalid_argument);
    BenchSpec one_class;
    one_class.classes = 1;
    CHECK_THROWS_AS(run_bench(one_class), std::invalid_argument);
}
