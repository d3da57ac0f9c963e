#pragma once

// Confidence of the winner class under per-class Gaussian logits.
//
// Winner selection is argmax over means (smallest index on ties). The
// confidence is P(X_w >= max of the others) with X_i ~ N(mu_i, sigma_i^2)
// independent. Five estimators:
//
//   lower-bound     product of pairwise win probabilities; exact for C=2,
//                   conservative otherwise; no sampling
//   quadrature      deterministic evaluation of the defining integral;
//                   serves as the in-repo exact reference
//   mc-integration  Monte Carlo average of the CDF product, N draws
//   joint-sampling  relative frequency over N joint draws (N*C values)
//   softmax-avg     mean softmax over T reparameterized logit samples
//                   (the sampling baseline; returns a full C-vector)
//
// All sampling estimators draw through DeterministicStream and are pure
// functions of (input, seed, stream_id). Every routine takes the winner
// index explicitly and works for any class in that role, which is what the
// ensemble layer needs when members disagree with the ensemble pick.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "logitconf/gaussian.hpp"
#include "logitconf/normal.hpp"
#include "logitconf/rng.hpp"

namespace logitconf {

enum class Method {
    LowerBound,
    Quadrature,
    McIntegration,
    JointSampling,
    SoftmaxAvg,
};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::LowerBound: return "lower-bound";
        case Method::Quadrature: return "quadrature";
        case Method::McIntegration: return "mc-integration";
        case Method::JointSampling: return "joint-sampling";
        case Method::SoftmaxAvg: return "softmax-avg";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "lower-bound") return Method::LowerBound;
    if (s == "quadrature") return Method::Quadrature;
    if (s == "mc-integration") return Method::McIntegration;
    if (s == "joint-sampling") return Method::JointSampling;
    if (s == "softmax-avg") return Method::SoftmaxAvg;
    throw std::invalid_argument("unknown method: " + s);
}

struct EstimatorConfig {
    Method method = Method::LowerBound;
    uint64_t sample_count = 1000;   // N for mc/joint, T for softmax-avg
    uint64_t seed = 0;
    uint32_t quadrature_points = 129;
    // Share one standard-normal pool across the field, scaled per pixel.
    // Cheap and fine for timing runs; keep off when per-pixel independence
    // matters (statistical tests).
    bool reuse_sample_pool = false;

    void validate() const {
        if (sample_count < 1)
            throw std::invalid_argument("sample_count must be >= 1");
        if (quadrature_points < 51)
            throw std::invalid_argument("quadrature_points must be >= 51");
    }
};

inline size_t select_winner(std::span<const double> means) {
    size_t best = 0;
    for (size_t i = 1; i < means.size(); ++i)
        if (means[i] > means[best]) best = i;
    return best;
}

inline size_t select_winner(const ClassGaussians& g) {
    return select_winner(std::span<const double>(g.means));
}

// Phi_{w,j}: probability that a draw from class w exceeds a draw from class j.
inline double pairwise_win_prob(double mu_w, double sd_w, double mu_j, double sd_j) {
    return std_normal_cdf((mu_w - mu_j) / std::sqrt(sd_w * sd_w + sd_j * sd_j));
}

// Product of the C-1 pairwise win probabilities. Exact for C=2. The fast
// path multiplies directly; once the running product dips toward the
// underflow region the whole product is redone in log space.
inline double confidence_lower_bound(std::span<const double> means,
                                     std::span<const double> stds,
                                     size_t winner) {
    const size_t c = means.size();
    double prod = 1.0;
    for (size_t j = 0; j < c; ++j) {
        if (j == winner) continue;
        prod *= pairwise_win_prob(means[winner], stds[winner], means[j], stds[j]);
        if (prod < 1e-280) {
            double logsum = 0.0;
            for (size_t i = 0; i < c; ++i) {
                if (i == winner) continue;
                const double d = means[winner] - means[i];
                const double s = std::sqrt(stds[winner] * stds[winner] + stds[i] * stds[i]);
                logsum += std_normal_logcdf(d / s);
            }
            if (logsum < -690.77552789821371) // log(1e-300)
                return 0.0;
            return std::exp(logsum);
        }
    }
    return prod;
}

inline double confidence_lower_bound(const ClassGaussians& g, size_t winner) {
    return confidence_lower_bound(g.means, g.stds, winner);
}

struct QuadratureOptions {
    uint32_t initial_points = 129; // nodes of the first composite pass
    double refine_tol = 1e-10;     // successive-estimate agreement
    uint32_t node_cap = 1u << 18;
};

struct QuadratureValue {
    double value = 0.0;
    bool converged = false;
    uint32_t nodes = 0;
};

// Deterministic evaluation of  integral phi_w(x) prod_{j!=w} Phi_j(x) dx
// over [mu_w - 12 sd_w, mu_w + 12 sd_w] (truncation below 1e-30). Composite
// Simpson, node count doubled until two successive estimates agree to
// refine_tol; refinement reuses all previously evaluated nodes.
inline QuadratureValue win_prob_quadrature(std::span<const double> means,
                                           std::span<const double> stds,
                                           size_t target,
                                           const QuadratureOptions& opt = {}) {
    const size_t c = means.size();
    const double mu_w = means[target];
    const double sd_w = stds[target];

    // Standardized variable t: x = mu_w + sd_w * t.
    auto integrand = [&](double t) {
        double prod = std_normal_pdf(t);
        const double x = mu_w + sd_w * t;
        for (size_t j = 0; j < c; ++j) {
            if (j == target) continue;
            prod *= std_normal_cdf((x - means[j]) / stds[j]);
            if (prod == 0.0) break;
        }
        return prod;
    };

    const double a = -12.0, b = 12.0;
    uint32_t intervals = std::max<uint32_t>(opt.initial_points - 1, 2);
    if (intervals % 2) ++intervals;

    const double fa = integrand(a), fb = integrand(b);
    double sum_interior = 0.0; // every interior node seen so far
    double sum_odd = 0.0;      // nodes at odd positions of the current grid
    {
        const double h = (b - a) / intervals;
        for (uint32_t i = 1; i < intervals; ++i) {
            const double v = integrand(a + i * h);
            sum_interior += v;
            if (i % 2) sum_odd += v;
        }
    }
    double h = (b - a) / intervals;
    double estimate = h / 3.0 * (fa + fb + 2.0 * (sum_interior - sum_odd) + 4.0 * sum_odd);

    while (true) {
        if (2 * intervals + 1 > opt.node_cap)
            return {std::min(estimate, 1.0), false, intervals + 1};
        // Doubling: old nodes all become even positions, new midpoints odd.
        intervals *= 2;
        h = (b - a) / intervals;
        double new_odd = 0.0;
        for (uint32_t i = 1; i < intervals; i += 2)
            new_odd += integrand(a + i * h);
        const double next = h / 3.0 * (fa + fb + 2.0 * sum_interior + 4.0 * new_odd);
        sum_interior += new_odd;
        const bool done = std::abs(next - estimate) < opt.refine_tol;
        estimate = next;
        if (done) return {std::min(estimate, 1.0), true, intervals + 1};
    }
}

inline QuadratureValue confidence_quadrature(const ClassGaussians& g, size_t winner,
                                             uint32_t quadrature_points = 129) {
    QuadratureOptions opt;
    opt.initial_points = quadrature_points;
    return win_prob_quadrature(g.means, g.stds, winner, opt);
}

struct WinProbVector {
    std::vector<double> probs;
    uint32_t nonconverged = 0;
};

// Quadrature with every class in the winner role; entries sum to 1 up to
// the quadrature tolerance.
inline WinProbVector win_prob_all_classes(std::span<const double> means,
                                          std::span<const double> stds,
                                          const QuadratureOptions& opt = {}) {
    WinProbVector out;
    out.probs.resize(means.size());
    for (size_t i = 0; i < means.size(); ++i) {
        const QuadratureValue q = win_prob_quadrature(means, stds, i, opt);
        out.probs[i] = q.value;
        if (!q.converged) ++out.nonconverged;
    }
    return out;
}

inline WinProbVector win_prob_all_classes(const ClassGaussians& g,
                                          const QuadratureOptions& opt = {}) {
    return win_prob_all_classes(g.means, g.stds, opt);
}

// Eq-style MC integration: draws x_k from the winner density and averages
// the product of the other classes' CDFs. `pool`, when non-empty, supplies
// the standard-normal draws instead of the stream (shared-pool mode).
inline double confidence_mc(std::span<const double> means,
                            std::span<const double> stds,
                            size_t winner, uint64_t n,
                            const DeterministicStream& stream,
                            std::span<const double> pool = {}) {
    const size_t c = means.size();
    const double mu_w = means[winner];
    const double sd_w = stds[winner];
    double sum = 0.0;
    for (uint64_t k = 0; k < n; ++k) {
        const double z = pool.empty() ? stream.normal_at(k) : pool[k];
        const double x = mu_w + sd_w * z;
        double prod = 1.0;
        for (size_t j = 0; j < c; ++j) {
            if (j == winner) continue;
            prod *= std_normal_cdf((x - means[j]) / stds[j]);
            if (prod == 0.0) break;
        }
        sum += prod;
    }
    return std::min(sum / static_cast<double>(n), 1.0);
}

inline double confidence_mc(const ClassGaussians& g, size_t winner, uint64_t n,
                            const DeterministicStream& stream) {
    return confidence_mc(g.means, g.stds, winner, n, stream);
}

// Relative frequency of the winner drawing the largest value over n joint
// draws (ties count as wins). Trial k, class i consumes normal index k*C+i.
inline double confidence_joint_sampling(std::span<const double> means,
                                        std::span<const double> stds,
                                        size_t winner, uint64_t n,
                                        const DeterministicStream& stream) {
    const size_t c = means.size();
    uint64_t wins = 0;
    for (uint64_t k = 0; k < n; ++k) {
        const double xw = means[winner] + stds[winner] * stream.normal_at(k * c + winner);
        bool win = true;
        for (size_t i = 0; i < c; ++i) {
            if (i == winner) continue;
            const double xi = means[i] + stds[i] * stream.normal_at(k * c + i);
            if (xi > xw) { win = false; break; }
        }
        if (win) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(n);
}

inline double confidence_joint_sampling(const ClassGaussians& g, size_t winner,
                                        uint64_t n, const DeterministicStream& stream) {
    return confidence_joint_sampling(g.means, g.stds, winner, n, stream);
}

// Sampling baseline: mean of softmax over T reparameterized logit vectors.
// Output entries are positive and sum to 1 (Kahan-compensated average of
// exactly normalized vectors). Sample t, class i consumes normal t*C+i,
// or pool[t*C+i] in shared-pool mode.
inline void softmax_avg_probs(std::span<const double> means,
                              std::span<const double> stds,
                              uint64_t t_samples,
                              const DeterministicStream& stream,
                              std::span<double> out,
                              std::span<const double> pool = {}) {
    const size_t c = means.size();
    std::vector<double> acc(c, 0.0), comp(c, 0.0), x(c);
    for (uint64_t t = 0; t < t_samples; ++t) {
        double m = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < c; ++i) {
            const uint64_t k = t * c + i;
            const double eps = pool.empty() ? stream.normal_at(k) : pool[k];
            x[i] = means[i] + stds[i] * eps;
            m = std::max(m, x[i]);
        }
        double norm = 0.0;
        for (size_t i = 0; i < c; ++i) {
            x[i] = std::exp(x[i] - m);
            norm += x[i];
        }
        for (size_t i = 0; i < c; ++i) {
            const double y = x[i] / norm - comp[i];
            const double s = acc[i] + y;
            comp[i] = (s - acc[i]) - y;
            acc[i] = s;
        }
    }
    for (size_t i = 0; i < c; ++i)
        out[i] = std::min(acc[i] / static_cast<double>(t_samples), 1.0);
}

inline std::vector<double> softmax_avg_probs(const ClassGaussians& g, uint64_t t_samples,
                                             const DeterministicStream& stream) {
    std::vector<double> out(g.classes());
    softmax_avg_probs(g.means, g.stds, t_samples, stream, out);
    return out;
}

// ---------------------------------------------------------------------------
// Field driver

struct FieldResult {
    uint32_t height = 0;
    uint32_t width = 0;
    std::vector<uint32_t> pred;
    std::vector<double> conf;
    std::vector<double> unc; // 1 - conf
    uint64_t nonconverged = 0;
};

namespace detail {

// stream_id reserved for the shared sample pool; pixel ids are flat indices
// and cannot collide with it.
inline constexpr uint64_t kPoolStreamId = ~0ull;

inline std::vector<double> draw_pool(const EstimatorConfig& cfg, uint32_t classes) {
    std::vector<double> pool;
    if (!cfg.reuse_sample_pool) return pool;
    size_t n = 0;
    if (cfg.method == Method::McIntegration) n = cfg.sample_count;
    if (cfg.method == Method::SoftmaxAvg) n = cfg.sample_count * classes;
    if (n == 0) return pool;
    const DeterministicStream s{cfg.seed, kPoolStreamId};
    pool.resize(n);
    for (size_t k = 0; k < n; ++k) pool[k] = s.normal_at(k);
    return pool;
}

} // namespace detail

// Per-pixel prediction (argmax mean), confidence under cfg.method for that
// class, and uncertainty = 1 - confidence. Pixel p uses stream_id = p, so
// the output does not depend on how pixels are partitioned across threads.
inline FieldResult field_confidence(const GaussianField& f, const EstimatorConfig& cfg,
                                    unsigned threads = 1) {
    cfg.validate();
    const uint64_t n = f.pixels();
    FieldResult r;
    r.height = f.height;
    r.width = f.width;
    r.pred.resize(n);
    r.conf.resize(n);
    r.unc.resize(n);

    const std::vector<double> pool = detail::draw_pool(cfg, f.classes);
    QuadratureOptions qopt;
    qopt.initial_points = cfg.quadrature_points;

    std::atomic<uint64_t> nonconverged{0};
    auto worker = [&](uint64_t begin, uint64_t end) {
        uint64_t local_nc = 0;
        std::vector<double> probs(f.classes);
        for (uint64_t p = begin; p < end; ++p) {
            const auto means = f.means_at(p);
            const auto stds = f.stds_at(p);
            const size_t w = select_winner(means);
            const DeterministicStream stream{cfg.seed, p};
            double conf = 0.0;
            switch (cfg.method) {
                case Method::LowerBound:
                    conf = confidence_lower_bound(means, stds, w);
                    break;
                case Method::Quadrature: {
                    const QuadratureValue q = win_prob_quadrature(means, stds, w, qopt);
                    conf = q.value;
                    if (!q.converged) ++local_nc;
                    break;
                }
                case Method::McIntegration:
                    conf = confidence_mc(means, stds, w, cfg.sample_count, stream, pool);
                    break;
                case Method::JointSampling:
                    conf = confidence_joint_sampling(means, stds, w, cfg.sample_count, stream);
                    break;
                case Method::SoftmaxAvg:
                    softmax_avg_probs(means, stds, cfg.sample_count, stream, probs, pool);
                    conf = probs[w];
                    break;
            }
            r.pred[p] = static_cast<uint32_t>(w);
            r.conf[p] = conf;
            r.unc[p] = 1.0 - conf;
        }
        nonconverged += local_nc;
    };

    if (threads <= 1 || n < 2) {
        worker(0, n);
    } else {
        const unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(n));
        std::vector<std::thread> workers;
        workers.reserve(t);
        for (unsigned i = 0; i < t; ++i) {
            const uint64_t begin = n * i / t;
            const uint64_t end = n * (i + 1) / t;
            workers.emplace_back(worker, begin, end);
        }
        for (auto& th : workers) th.join();
    }
    r.nonconverged = nonconverged.load();
    return r;
}

} // namespace logitconf
