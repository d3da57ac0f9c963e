#pragma once

// Calibration evaluation: confidence binning, ACE/ECE, confusion matrix
// and mean IoU.
//
// ACE is the unweighted mean of |mean confidence - accuracy| over the
// non-empty bins; ECE weights each bin by its share of the samples. The
// default equal-width scheme uses right-closed bins with 1.0 in the top
// bin; empty bins are dropped. Equal-mass binning sorts by confidence
// (ties by original index) and splits into near-equal-count groups.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace logitconf {

enum class BinScheme { EqualWidth, EqualMass };

inline const char* scheme_name(BinScheme s) {
    return s == BinScheme::EqualWidth ? "equal-width" : "equal-mass";
}

inline BinScheme parse_scheme(const std::string& s) {
    if (s == "equal-width") return BinScheme::EqualWidth;
    if (s == "equal-mass") return BinScheme::EqualMass;
    throw std::invalid_argument("unknown binning scheme: " + s);
}

struct BinStats {
    double lower = 0.0;
    double upper = 0.0;
    uint64_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

inline std::vector<BinStats> bin_predictions(std::span<const double> confidences,
                                             std::span<const uint8_t> correct,
                                             uint32_t requested_bins,
                                             BinScheme scheme) {
    if (confidences.size() != correct.size())
        throw std::invalid_argument("confidence/correct length mismatch");
    if (confidences.empty())
        throw std::invalid_argument("no samples to bin");
    if (requested_bins < 1)
        throw std::invalid_argument("requested_bins must be >= 1");
    for (double c : confidences)
        if (!(c >= 0.0 && c <= 1.0))
            throw std::invalid_argument("confidence outside [0,1]");

    const size_t n = confidences.size();
    const uint32_t m = requested_bins;
    std::vector<BinStats> out;

    if (scheme == BinScheme::EqualWidth) {
        std::vector<uint64_t> count(m, 0), hits(m, 0);
        std::vector<double> conf_sum(m, 0.0);
        for (size_t i = 0; i < n; ++i) {
            // right-closed intervals: bin b covers (b/m, (b+1)/m], 0 stays in bin 0
            const double scaled = confidences[i] * m;
            int64_t b = static_cast<int64_t>(std::ceil(scaled)) - 1;
            b = std::clamp<int64_t>(b, 0, m - 1);
            ++count[b];
            conf_sum[b] += confidences[i];
            hits[b] += correct[i] ? 1 : 0;
        }
        for (uint32_t b = 0; b < m; ++b) {
            if (count[b] == 0) continue;
            BinStats s;
            s.lower = static_cast<double>(b) / m;
            s.upper = static_cast<double>(b + 1) / m;
            s.count = count[b];
            s.mean_confidence = conf_sum[b] / static_cast<double>(count[b]);
            s.accuracy = static_cast<double>(hits[b]) / static_cast<double>(count[b]);
            out.push_back(s);
        }
    } else {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return confidences[a] < confidences[b];
        });
        size_t pos = 0;
        for (uint32_t g = 0; g < m; ++g) {
            const size_t size = n / m + (g < n % m ? 1 : 0);
            if (size == 0) continue;
            BinStats s;
            s.lower = confidences[order[pos]];
            s.upper = confidences[order[pos + size - 1]];
            s.count = size;
            double conf_sum = 0.0;
            uint64_t hits = 0;
            for (size_t k = pos; k < pos + size; ++k) {
                conf_sum += confidences[order[k]];
                hits += correct[order[k]] ? 1 : 0;
            }
            s.mean_confidence = conf_sum / static_cast<double>(size);
            s.accuracy = static_cast<double>(hits) / static_cast<double>(size);
            out.push_back(s);
            pos += size;
        }
    }
    return out;
}

inline double ace(std::span<const BinStats> bins) {
    if (bins.empty()) throw std::invalid_argument("ace: no bins");
    double sum = 0.0;
    for (const auto& b : bins) sum += std::abs(b.mean_confidence - b.accuracy);
    return sum / static_cast<double>(bins.size());
}

inline double ece(std::span<const BinStats> bins, uint64_t total_samples) {
    if (bins.empty()) throw std::invalid_argument("ece: no bins");
    if (total_samples == 0) throw std::invalid_argument("ece: zero samples");
    double sum = 0.0;
    for (const auto& b : bins)
        sum += static_cast<double>(b.count) / static_cast<double>(total_samples) *
               std::abs(b.mean_confidence - b.accuracy);
    return sum;
}

// Binned statistics plus the two scores; the serializable core of a report.
struct CalibrationReport {
    BinScheme scheme = BinScheme::EqualWidth;
    uint32_t requested_bins = 10;
    std::vector<BinStats> bins;
    double ace = 0.0;
    double ece = 0.0;
    uint64_t total_samples = 0;
};

inline CalibrationReport make_calibration_report(std::span<const double> confidences,
                                                 std::span<const uint8_t> correct,
                                                 uint32_t requested_bins,
                                                 BinScheme scheme) {
    CalibrationReport r;
    r.scheme = scheme;
    r.requested_bins = requested_bins;
    r.bins = bin_predictions(confidences, correct, requested_bins, scheme);
    r.ace = ace(r.bins);
    r.ece = ece(r.bins, confidences.size());
    r.total_samples = confidences.size();
    return r;
}

// ---------------------------------------------------------------------------
// Confusion matrix / mIoU

struct ConfusionMatrix {
    uint32_t classes = 0;
    std::optional<uint32_t> ignore_label;
    std::vector<uint64_t> counts; // rows = ground truth, cols = prediction

    explicit ConfusionMatrix(uint32_t c, std::optional<uint32_t> ignore = std::nullopt)
        : classes(c), ignore_label(ignore), counts(uint64_t(c) * c, 0) {
        if (c == 0) throw std::invalid_argument("confusion matrix needs classes >= 1");
    }

    uint64_t& at(uint32_t truth, uint32_t pred) { return counts[uint64_t(truth) * classes + pred]; }
    uint64_t at(uint32_t truth, uint32_t pred) const { return counts[uint64_t(truth) * classes + pred]; }

    uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), uint64_t{0}); }

    void add(const ConfusionMatrix& other) {
        if (other.classes != classes)
            throw std::invalid_argument("confusion matrix size mismatch");
        for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    }
};

// Pixels whose label or prediction equals ignore_label are skipped, so the
// ignored class index contributes to no count at all.
inline ConfusionMatrix accumulate_confusion(std::span<const uint32_t> pred,
                                            std::span<const uint32_t> labels,
                                            uint32_t classes,
                                            std::optional<uint32_t> ignore_label = std::nullopt) {
    if (pred.size() != labels.size())
        throw std::invalid_argument("pred/label shape mismatch");
    ConfusionMatrix cm(classes, ignore_label);
    for (size_t i = 0; i < pred.size(); ++i) {
        const uint32_t t = labels[i], p = pred[i];
        if (ignore_label && (t == *ignore_label || p == *ignore_label)) continue;
        if (t >= classes) throw std::out_of_range("label out of range");
        if (p >= classes) throw std::out_of_range("prediction out of range");
        ++cm.at(t, p);
    }
    return cm;
}

struct IouResult {
    std::vector<double> per_class; // NaN for classes absent from truth and prediction
    double mean = 0.0;
};

inline IouResult miou(const ConfusionMatrix& cm) {
    IouResult r;
    r.per_class.assign(cm.classes, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    uint32_t scored = 0;
    for (uint32_t c = 0; c < cm.classes; ++c) {
        const uint64_t tp = cm.at(c, c);
        uint64_t fp = 0, fn = 0;
        for (uint32_t k = 0; k < cm.classes; ++k) {
            if (k == c) continue;
            fp += cm.at(k, c);
            fn += cm.at(c, k);
        }
        const uint64_t denom = tp + fp + fn;
        if (denom == 0) continue; // absent everywhere: excluded from the mean
        r.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
        sum += r.per_class[c];
        ++scored;
    }
    if (scored == 0) throw std::invalid_argument("miou: every class absent");
    r.mean = sum / scored;
    return r;
}

} // namespace logitconf
