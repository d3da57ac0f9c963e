#pragma once

// Desk-scale end-to-end pipeline: a synthetic heteroscedastic dataset, a
// linear classifier with a Gaussian logit head trained by the sampled
// cross-entropy loss (hand-derived gradients), and a point-estimate softmax
// baseline for the uncalibrated comparison.
//
// The dataset is class blobs in the plane plus label flips inside a
// half-plane region, so part of the input space carries irreducible label
// noise. The region is linear on purpose: the log-std head is linear in x,
// so elevated noise there is representable and the trained model can lower
// its confidence exactly where accuracy drops.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "logitconf/ensemble.hpp"
#include "logitconf/gaussian.hpp"
#include "logitconf/rng.hpp"

namespace logitconf::toy {

struct DatasetSpec {
    uint32_t classes = 3;
    uint32_t samples = 12000;
    std::vector<double> centers;   // classes x 2; filled by defaults() if empty
    std::vector<double> blob_stds; // per class
    double flip_prob = 0.25;
    // flip region: { x : dot(flip_direction, x) > flip_threshold }
    std::array<double, 2> flip_direction = {0.0, -1.0};
    double flip_threshold = 0.8;

    // Blob centers sit on a line along x, so any sample competes with at
    // most one neighbouring class, while the flip band runs along y,
    // orthogonal to every class boundary. The linear log-std head can
    // represent noise that varies with y exactly; the point baseline cannot
    // react to it at all.
    static DatasetSpec defaults(uint32_t classes = 3, uint32_t samples = 12000) {
        DatasetSpec s;
        s.classes = classes;
        s.samples = samples;
        s.centers.resize(size_t(classes) * 2);
        s.blob_stds.assign(classes, 0.8);
        const double spacing = 2.2;
        for (uint32_t k = 0; k < classes; ++k) {
            s.centers[2 * k] = spacing * (k - 0.5 * (classes - 1));
            s.centers[2 * k + 1] = 0.0;
        }
        return s;
    }

    void validate() const {
        if (classes < 2) throw std::invalid_argument("dataset needs >= 2 classes");
        if (samples < 1) throw std::invalid_argument("dataset needs >= 1 sample");
        if (centers.size() != size_t(classes) * 2)
            throw std::invalid_argument("centers must be classes x 2");
        if (blob_stds.size() != classes)
            throw std::invalid_argument("one blob std per class");
        if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
            throw std::invalid_argument("flip_prob outside [0,1]");
    }
};

struct SyntheticDataset {
    uint32_t classes = 0;
    std::vector<double> inputs;   // N x 2
    std::vector<uint32_t> labels; // N
    std::vector<uint8_t> in_flip_region;
    std::vector<uint8_t> flipped;

    uint64_t size() const { return labels.size(); }
};

// Sample n is a pure function of (seed, n): position from normals 0 and 1,
// flip decision from uniform words 8 and 9 (always consumed, so datasets
// generated with different flip_prob share positions).
inline SyntheticDataset generate_dataset(const DatasetSpec& spec, uint64_t seed) {
    spec.validate();
    SyntheticDataset d;
    d.classes = spec.classes;
    d.inputs.resize(size_t(spec.samples) * 2);
    d.labels.resize(spec.samples);
    d.in_flip_region.resize(spec.samples);
    d.flipped.resize(spec.samples);
    for (uint32_t n = 0; n < spec.samples; ++n) {
        const uint32_t k = n % spec.classes;
        const DeterministicStream s{seed, n};
        const double x = spec.centers[2 * k] + spec.blob_stds[k] * s.normal_at(0);
        const double y = spec.centers[2 * k + 1] + spec.blob_stds[k] * s.normal_at(1);
        d.inputs[2 * n] = x;
        d.inputs[2 * n + 1] = y;
        const bool in_region =
            spec.flip_direction[0] * x + spec.flip_direction[1] * y > spec.flip_threshold;
        const double u_flip = s.uniform_at(8);
        const double u_target = s.uniform_at(9);
        uint32_t label = k;
        bool flipped = false;
        if (in_region && u_flip < spec.flip_prob) {
            uint32_t offset = 1 + static_cast<uint32_t>(u_target * (spec.classes - 1));
            offset = std::min(offset, spec.classes - 1);
            label = (k + offset) % spec.classes;
            flipped = true;
        }
        d.labels[n] = label;
        d.in_flip_region[n] = in_region ? 1 : 0;
        d.flipped[n] = flipped ? 1 : 0;
    }
    return d;
}

// Even indices train, odd indices test: balanced across the class cycle
// and independent of any RNG.
inline std::pair<SyntheticDataset, SyntheticDataset> split_even_odd(const SyntheticDataset& d) {
    SyntheticDataset train, test;
    train.classes = test.classes = d.classes;
    for (uint64_t n = 0; n < d.size(); ++n) {
        SyntheticDataset& dst = (n % 2 == 0) ? train : test;
        dst.inputs.push_back(d.inputs[2 * n]);
        dst.inputs.push_back(d.inputs[2 * n + 1]);
        dst.labels.push_back(d.labels[n]);
        dst.in_flip_region.push_back(d.in_flip_region[n]);
        dst.flipped.push_back(d.flipped[n]);
    }
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Models

struct GaussianHeadModel {
    uint32_t classes = 0;
    uint32_t dim = 2;
    std::vector<double> w_mu, b_mu; // C x D, C
    std::vector<double> w_s, b_s;   // C x D, C (log-std head)
    double log_std_min = -10.0;
    double log_std_max = 10.0;

    static GaussianHeadModel init(uint32_t classes, uint32_t dim, uint64_t seed) {
        GaussianHeadModel m;
        m.classes = classes;
        m.dim = dim;
        m.w_mu.resize(size_t(classes) * dim);
        m.b_mu.assign(classes, 0.0);
        m.w_s.assign(size_t(classes) * dim, 0.0); // sigma starts at 1
        m.b_s.assign(classes, 0.0);
        DeterministicStream s{derive_seed(seed, 0x696e6974), 0};
        for (auto& w : m.w_mu) w = 0.1 * s.next_normal();
        return m;
    }

    // mu and raw (unclamped) log-std for one input
    void forward(std::span<const double> x, std::span<double> mu,
                 std::span<double> s_raw) const {
        for (uint32_t i = 0; i < classes; ++i) {
            double acc_mu = b_mu[i], acc_s = b_s[i];
            for (uint32_t d = 0; d < dim; ++d) {
                acc_mu += w_mu[size_t(i) * dim + d] * x[d];
                acc_s += w_s[size_t(i) * dim + d] * x[d];
            }
            mu[i] = acc_mu;
            s_raw[i] = acc_s;
        }
    }

    double sigma_from_raw(double s_raw) const {
        return std::exp(std::clamp(s_raw, log_std_min, log_std_max));
    }
};

struct PointEstimateModel {
    uint32_t classes = 0;
    uint32_t dim = 2;
    std::vector<double> w, b;

    static PointEstimateModel init(uint32_t classes, uint32_t dim, uint64_t seed) {
        PointEstimateModel m;
        m.classes = classes;
        m.dim = dim;
        m.w.resize(size_t(classes) * dim);
        m.b.assign(classes, 0.0);
        DeterministicStream s{derive_seed(seed, 0x696e6974), 0};
        for (auto& w : m.w) w = 0.1 * s.next_normal();
        return m;
    }

    void logits(std::span<const double> x, std::span<double> out) const {
        for (uint32_t i = 0; i < classes; ++i) {
            double acc = b[i];
            for (uint32_t d = 0; d < dim; ++d) acc += w[size_t(i) * dim + d] * x[d];
            out[i] = acc;
        }
    }
};

namespace detail {

inline void softmax_inplace(std::span<double> v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double norm = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        norm += x;
    }
    for (double& x : v) x /= norm;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Sampled cross-entropy loss with exact gradients
//
// Per sample:  loss = -log[ (1/T) sum_t softmax(mu + sigma .* eps_t) ]_y
// with sigma = exp(clamp(W_s x + b_s)). The noise tensor (B x T x C) is
// supplied by the caller, which makes the loss a deterministic function of
// (model, batch, noise) and therefore checkable by finite differences.

struct GaussianLossGrads {
    double loss = 0.0;
    std::vector<double> d_w_mu, d_b_mu, d_w_s, d_b_s;
};

inline GaussianLossGrads logit_sampling_loss(const GaussianHeadModel& m,
                                             std::span<const double> inputs,
                                             std::span<const uint32_t> labels,
                                             std::span<const double> noise,
                                             uint32_t t_samples) {
    const uint32_t c = m.classes, dim = m.dim;
    const size_t batch = labels.size();
    if (t_samples < 1) throw std::invalid_argument("loss needs T >= 1");
    if (inputs.size() != batch * dim) throw std::invalid_argument("inputs shape mismatch");
    if (noise.size() != batch * t_samples * c)
        throw std::invalid_argument("noise shape mismatch");

    GaussianLossGrads g;
    g.d_w_mu.assign(size_t(c) * dim, 0.0);
    g.d_b_mu.assign(c, 0.0);
    g.d_w_s.assign(size_t(c) * dim, 0.0);
    g.d_b_s.assign(c, 0.0);

    std::vector<double> mu(c), s_raw(c), sigma(c), pbar(c), grad_mu(c), grad_s(c);
    std::vector<double> probs(size_t(t_samples) * c); // softmax per sample t
    const double inv_batch = 1.0 / static_cast<double>(batch);

    for (size_t b = 0; b < batch; ++b) {
        const std::span<const double> x = inputs.subspan(b * dim, dim);
        const uint32_t y = labels[b];
        if (y >= c) throw std::invalid_argument("label out of range");
        m.forward(x, mu, s_raw);
        for (uint32_t i = 0; i < c; ++i) sigma[i] = m.sigma_from_raw(s_raw[i]);

        std::fill(pbar.begin(), pbar.end(), 0.0);
        for (uint32_t t = 0; t < t_samples; ++t) {
            const std::span<const double> eps = noise.subspan((b * t_samples + t) * c, c);
            std::span<double> p{probs.data() + size_t(t) * c, c};
            for (uint32_t i = 0; i < c; ++i) p[i] = mu[i] + sigma[i] * eps[i];
            detail::softmax_inplace(p);
            for (uint32_t i = 0; i < c; ++i) pbar[i] += p[i];
        }
        for (uint32_t i = 0; i < c; ++i) pbar[i] /= t_samples;

        const double sample_loss = -std::log(pbar[y]);
        if (!std::isfinite(sample_loss))
            throw std::runtime_error("non-finite loss at sample " + std::to_string(b));
        g.loss += sample_loss * inv_batch;

        // dL/dxhat_{t,j} = (1/T) (p^t_y / pbar_y) (p^t_j - [j==y])
        std::fill(grad_mu.begin(), grad_mu.end(), 0.0);
        std::fill(grad_s.begin(), grad_s.end(), 0.0);
        const double inv_t = 1.0 / static_cast<double>(t_samples);
        for (uint32_t t = 0; t < t_samples; ++t) {
            const std::span<const double> eps = noise.subspan((b * t_samples + t) * c, c);
            const std::span<const double> p{probs.data() + size_t(t) * c, c};
            const double scale = inv_t * p[y] / pbar[y];
            for (uint32_t j = 0; j < c; ++j) {
                const double dxhat = scale * (p[j] - (j == y ? 1.0 : 0.0));
                grad_mu[j] += dxhat;
                grad_s[j] += dxhat * eps[j];
            }
        }
        for (uint32_t j = 0; j < c; ++j) {
            // through sigma = exp(s); zero where the clamp is active
            const bool active = s_raw[j] > m.log_std_min && s_raw[j] < m.log_std_max;
            const double ds = active ? grad_s[j] * sigma[j] : 0.0;
            g.d_b_mu[j] += grad_mu[j] * inv_batch;
            g.d_b_s[j] += ds * inv_batch;
            for (uint32_t d = 0; d < dim; ++d) {
                g.d_w_mu[size_t(j) * dim + d] += grad_mu[j] * x[d] * inv_batch;
                g.d_w_s[size_t(j) * dim + d] += ds * x[d] * inv_batch;
            }
        }
    }
    return g;
}

struct PointLossGrads {
    double loss = 0.0;
    std::vector<double> d_w, d_b;
};

inline PointLossGrads cross_entropy_loss(const PointEstimateModel& m,
                                         std::span<const double> inputs,
                                         std::span<const uint32_t> labels) {
    const uint32_t c = m.classes, dim = m.dim;
    const size_t batch = labels.size();
    PointLossGrads g;
    g.d_w.assign(size_t(c) * dim, 0.0);
    g.d_b.assign(c, 0.0);
    std::vector<double> p(c);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (size_t b = 0; b < batch; ++b) {
        const std::span<const double> x = inputs.subspan(b * dim, dim);
        const uint32_t y = labels[b];
        m.logits(x, p);
        detail::softmax_inplace(p);
        const double sample_loss = -std::log(p[y]);
        if (!std::isfinite(sample_loss))
            throw std::runtime_error("non-finite loss at sample " + std::to_string(b));
        g.loss += sample_loss * inv_batch;
        for (uint32_t j = 0; j < c; ++j) {
            const double dlogit = (p[j] - (j == y ? 1.0 : 0.0)) * inv_batch;
            g.d_b[j] += dlogit;
            for (uint32_t d = 0; d < dim; ++d)
                g.d_w[size_t(j) * dim + d] += dlogit * x[d];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double learning_rate = 0.05;
    // The exp parameterization amplifies log-std steps, so the sigma head
    // trains at a fraction of the main rate; 1.0 disables the damping.
    double sigma_lr_scale = 0.25;
    uint32_t epochs = 120;
    uint32_t batch_size = 64;
    uint32_t loss_samples = 150; // T; CLI desk default is 30
    uint64_t seed = 1;
};

namespace detail {

inline std::vector<uint32_t> shuffled_indices(uint64_t n, DeterministicStream& s) {
    std::vector<uint32_t> idx(n);
    for (uint64_t i = 0; i < n; ++i) idx[i] = static_cast<uint32_t>(i);
    for (uint64_t i = n; i > 1; --i) {
        const uint64_t j = std::min<uint64_t>(static_cast<uint64_t>(s.next_uniform() * i), i - 1);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace detail

struct TrainResult {
    std::vector<double> epoch_loss;
};

inline TrainResult train(GaussianHeadModel& m, const SyntheticDataset& data,
                         const TrainConfig& cfg) {
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    DeterministicStream stream{derive_seed(cfg.seed, 0x747261696e), 0};
    TrainResult result;
    std::vector<double> batch_inputs;
    std::vector<uint32_t> batch_labels;
    std::vector<double> noise;
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<uint32_t> order = detail::shuffled_indices(data.size(), stream);
        double epoch_loss = 0.0;
        uint64_t seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t bs = std::min<size_t>(cfg.batch_size, order.size() - start);
            batch_inputs.resize(bs * m.dim);
            batch_labels.resize(bs);
            for (size_t i = 0; i < bs; ++i) {
                const uint32_t n = order[start + i];
                batch_inputs[2 * i] = data.inputs[2 * n];
                batch_inputs[2 * i + 1] = data.inputs[2 * n + 1];
                batch_labels[i] = data.labels[n];
            }
            noise.resize(bs * cfg.loss_samples * m.classes);
            for (auto& e : noise) e = stream.next_normal();
            GaussianLossGrads g;
            try {
                g = logit_sampling_loss(m, batch_inputs, batch_labels, noise, cfg.loss_samples);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         ": " + e.what());
            }
            const double sigma_lr = cfg.learning_rate * cfg.sigma_lr_scale;
            for (size_t i = 0; i < m.w_mu.size(); ++i) m.w_mu[i] -= cfg.learning_rate * g.d_w_mu[i];
            for (size_t i = 0; i < m.b_mu.size(); ++i) m.b_mu[i] -= cfg.learning_rate * g.d_b_mu[i];
            for (size_t i = 0; i < m.w_s.size(); ++i) m.w_s[i] -= sigma_lr * g.d_w_s[i];
            for (size_t i = 0; i < m.b_s.size(); ++i) m.b_s[i] -= sigma_lr * g.d_b_s[i];
            epoch_loss += g.loss * static_cast<double>(bs);
            seen += bs;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
    }
    return result;
}

inline TrainResult train_point(PointEstimateModel& m, const SyntheticDataset& data,
                               const TrainConfig& cfg) {
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    DeterministicStream stream{derive_seed(cfg.seed, 0x747261696e), 0};
    TrainResult result;
    std::vector<double> batch_inputs;
    std::vector<uint32_t> batch_labels;
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<uint32_t> order = detail::shuffled_indices(data.size(), stream);
        double epoch_loss = 0.0;
        uint64_t seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t bs = std::min<size_t>(cfg.batch_size, order.size() - start);
            batch_inputs.resize(bs * m.dim);
            batch_labels.resize(bs);
            for (size_t i = 0; i < bs; ++i) {
                const uint32_t n = order[start + i];
                batch_inputs[2 * i] = data.inputs[2 * n];
                batch_inputs[2 * i + 1] = data.inputs[2 * n + 1];
                batch_labels[i] = data.labels[n];
            }
            PointLossGrads g = cross_entropy_loss(m, batch_inputs, batch_labels);
            if (!std::isfinite(g.loss))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
            for (size_t i = 0; i < m.w.size(); ++i) m.w[i] -= cfg.learning_rate * g.d_w[i];
            for (size_t i = 0; i < m.b.size(); ++i) m.b[i] -= cfg.learning_rate * g.d_b[i];
            epoch_loss += g.loss * static_cast<double>(bs);
            seen += bs;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Prediction

inline GaussianField predict_field(const GaussianHeadModel& m, std::span<const double> inputs) {
    const uint32_t c = m.classes;
    const uint64_t n = inputs.size() / m.dim;
    std::vector<double> means(n * c), stds(n * c), mu(c), s_raw(c);
    for (uint64_t i = 0; i < n; ++i) {
        m.forward(inputs.subspan(i * m.dim, m.dim), mu, s_raw);
        for (uint32_t k = 0; k < c; ++k) {
            means[i * c + k] = mu[k];
            stds[i * c + k] = m.sigma_from_raw(s_raw[k]);
        }
    }
    return GaussianField(1, static_cast<uint32_t>(n), c, std::move(means), std::move(stds));
}

// Softmax probabilities of the point baseline, N x C.
inline std::vector<double> point_softmax_probs(const PointEstimateModel& m,
                                               std::span<const double> inputs) {
    const uint32_t c = m.classes;
    const uint64_t n = inputs.size() / m.dim;
    std::vector<double> probs(n * c);
    std::vector<double> row(c);
    for (uint64_t i = 0; i < n; ++i) {
        m.logits(inputs.subspan(i * m.dim, m.dim), row);
        detail::softmax_inplace(row);
        std::copy(row.begin(), row.end(), probs.begin() + i * c);
    }
    return probs;
}

// E independent runs differing only in seed; members share the train/test data.
inline EnsembleField train_ensemble(const SyntheticDataset& train_data,
                                    const SyntheticDataset& test_data,
                                    const TrainConfig& base_cfg,
                                    std::span<const uint64_t> seeds) {
    if (seeds.empty()) throw std::invalid_argument("need at least one seed");
    EnsembleField e;
    for (uint64_t seed : seeds) {
        GaussianHeadModel m = GaussianHeadModel::init(train_data.classes, 2, seed);
        TrainConfig cfg = base_cfg;
        cfg.seed = seed;
        train(m, train_data, cfg);
        e.members.push_back(predict_field(m, test_data.inputs));
    }
    return e;
}

} // namespace logitconf::toy
