#pragma once

// Deep-ensemble aggregation. The ensemble class at a pixel is the argmax of
// the across-member mean of the logit means; the ensemble confidence is the
// plain average of each member's probability that THIS class beats all
// others under that member's distributions. The winner index is held fixed
// for every member, so the average is a probability about one event even
// when members disagree on the argmax.
//
// Member values are averaged by sorting and pairwise summation, and every
// member shares the per-pixel sample stream. Both choices make reordering
// and duplicating members bit-exact no-ops.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "logitconf/confidence.hpp"
#include "logitconf/gaussian.hpp"

namespace logitconf {

struct EnsembleField {
    std::vector<GaussianField> members;

    void validate() const {
        if (members.empty())
            throw std::invalid_argument("ensemble needs at least one member");
        for (const auto& m : members) {
            if (m.height != members[0].height || m.width != members[0].width ||
                m.classes != members[0].classes)
                throw std::invalid_argument("ensemble member shape mismatch");
        }
    }
};

namespace detail {

// Order-independent mean over member values (sorts its scratch argument).
// Reduction combines adjacent pairs bottom-up, so a duplicated member list
// sums to exactly twice the original; all-equal values short-circuit.
inline double member_mean(std::span<double> v) {
    std::sort(v.begin(), v.end());
    if (v.front() == v.back()) return v.front();
    const double denom = static_cast<double>(v.size());
    size_t n = v.size();
    while (n > 1) {
        size_t out = 0;
        for (size_t i = 0; i + 1 < n; i += 2) v[out++] = v[i] + v[i + 1];
        if (n % 2) v[out++] = v[n - 1];
        n = out;
    }
    return v[0] / denom;
}

} // namespace detail

inline std::vector<uint32_t> ensemble_predict(const EnsembleField& e) {
    e.validate();
    const auto& first = e.members[0];
    const uint64_t n = first.pixels();
    const uint32_t c = first.classes;
    std::vector<uint32_t> pred(n);
    std::vector<double> mean_means(c);
    std::vector<double> member_vals(e.members.size());
    for (uint64_t p = 0; p < n; ++p) {
        for (uint32_t i = 0; i < c; ++i) {
            for (size_t m = 0; m < e.members.size(); ++m)
                member_vals[m] = e.members[m].means_at(p)[i];
            mean_means[i] = detail::member_mean(member_vals);
        }
        pred[p] = static_cast<uint32_t>(select_winner(std::span<const double>(mean_means)));
    }
    return pred;
}

inline FieldResult ensemble_confidence(const EnsembleField& e, const EstimatorConfig& cfg,
                                       unsigned threads = 1) {
    e.validate();
    cfg.validate();
    const auto& first = e.members[0];
    const uint64_t n = first.pixels();
    const size_t e_count = e.members.size();

    FieldResult r;
    r.height = first.height;
    r.width = first.width;
    r.pred = ensemble_predict(e);
    r.conf.resize(n);
    r.unc.resize(n);

    QuadratureOptions qopt;
    qopt.initial_points = cfg.quadrature_points;
    const std::vector<double> pool = detail::draw_pool(cfg, first.classes);

    std::atomic<uint64_t> nonconverged{0};
    auto worker = [&](uint64_t begin, uint64_t end) {
        uint64_t local_nc = 0;
        std::vector<double> member_conf(e_count);
        std::vector<double> probs(first.classes);
        for (uint64_t p = begin; p < end; ++p) {
            const size_t w = r.pred[p];
            const DeterministicStream stream{cfg.seed, p}; // shared by all members
            for (size_t m = 0; m < e_count; ++m) {
                const auto means = e.members[m].means_at(p);
                const auto stds = e.members[m].stds_at(p);
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
                member_conf[m] = conf;
            }
            const double conf = detail::member_mean(member_conf);
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
        for (unsigned i = 0; i < t; ++i)
            workers.emplace_back(worker, n * i / t, n * (i + 1) / t);
        for (auto& th : workers) th.join();
    }
    r.nonconverged = nonconverged.load();
    return r;
}

} // namespace logitconf
