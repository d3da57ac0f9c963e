#pragma once

// Confidence-stage timing harness: one deterministic random field, each
// method timed over the identical input, median of R post-warmup repeats
// on the monotonic clock. Speedups are reported relative to softmax-avg
// at the configured sample count (the sampling baseline).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "logitconf/confidence.hpp"
#include "logitconf/gaussian.hpp"

namespace logitconf {

struct BenchSpec {
    uint32_t classes = 20;
    uint64_t pixels = 64 * 1024; // mirrors a 64x1024 range image
    std::vector<Method> methods = {Method::LowerBound, Method::SoftmaxAvg};
    uint64_t sample_count = 50;
    uint32_t repeats = 10;
    uint32_t warmup = 2;
    uint64_t seed = 1;
    unsigned threads = 1;
    bool reuse_sample_pool = true;

    void validate() const {
        if (classes < 2) throw std::invalid_argument("bench needs classes >= 2");
        if (pixels < 1) throw std::invalid_argument("bench needs pixels >= 1");
        if (repeats < 5) throw std::invalid_argument("bench needs repeats >= 5");
        if (methods.empty()) throw std::invalid_argument("bench needs at least one method");
    }
};

struct BenchResult {
    std::string method;
    uint32_t classes = 0;
    uint64_t pixels = 0;
    uint64_t sample_count = 0;
    uint32_t repeats = 0;
    uint32_t warmup = 0;
    std::vector<double> times_seconds; // exactly `repeats` entries
    double median_seconds = 0.0;
    double speedup_vs_reference = 0.0; // reference median / this median
    double mean_confidence = 0.0;      // numerical digest for determinism checks
    uint64_t nonconverged = 0;
};

// means uniform in [-5,5], stds log-uniform in [0.05,5]: the same input
// distribution the statistical tests use.
inline GaussianField random_bench_field(uint32_t classes, uint64_t pixels, uint64_t seed) {
    std::vector<double> means(pixels * classes), stds(pixels * classes);
    const double log_lo = std::log(0.05), log_hi = std::log(5.0);
    for (uint64_t p = 0; p < pixels; ++p) {
        const DeterministicStream s{seed, p};
        for (uint32_t c = 0; c < classes; ++c) {
            means[p * classes + c] = -5.0 + 10.0 * s.uniform_at(2 * c);
            stds[p * classes + c] = std::exp(log_lo + (log_hi - log_lo) * s.uniform_at(2 * c + 1));
        }
    }
    uint32_t h = 1;
    uint64_t w = pixels;
    if (pixels % 64 == 0 && pixels >= 64) { h = 64; w = pixels / 64; }
    return GaussianField(h, static_cast<uint32_t>(w), classes, std::move(means), std::move(stds));
}

inline std::vector<BenchResult> run_bench(const BenchSpec& spec) {
    spec.validate();
    const GaussianField field = random_bench_field(spec.classes, spec.pixels, spec.seed);

    std::vector<BenchResult> results;
    for (Method method : spec.methods) {
        EstimatorConfig cfg;
        cfg.method = method;
        cfg.sample_count = spec.sample_count;
        cfg.seed = spec.seed;
        cfg.reuse_sample_pool = spec.reuse_sample_pool;

        BenchResult r;
        r.method = method_name(method);
        r.classes = spec.classes;
        r.pixels = spec.pixels;
        r.sample_count = spec.sample_count;
        r.repeats = spec.repeats;
        r.warmup = spec.warmup;

        FieldResult out;
        for (uint32_t i = 0; i < spec.warmup + spec.repeats; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            out = field_confidence(field, cfg, spec.threads);
            const auto t1 = std::chrono::steady_clock::now();
            if (i >= spec.warmup)
                r.times_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        double sum = 0.0;
        for (double c : out.conf) sum += c;
        r.mean_confidence = sum / static_cast<double>(out.conf.size());
        r.nonconverged = out.nonconverged;

        std::vector<double> sorted = r.times_seconds;
        std::sort(sorted.begin(), sorted.end());
        const size_t n = sorted.size();
        r.median_seconds = (n % 2) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        results.push_back(std::move(r));
    }

    double reference = 0.0;
    for (const auto& r : results)
        if (r.method == method_name(Method::SoftmaxAvg)) reference = r.median_seconds;
    for (auto& r : results)
        r.speedup_vs_reference = reference > 0.0 ? reference / r.median_seconds : 0.0;
    return results;
}

} // namespace logitconf
