#pragma once

// Per-class Gaussian logit parameters: the atom every estimator works on.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace logitconf {

namespace detail {

inline void check_gaussian_slice(std::span<const double> means,
                                 std::span<const double> stds) {
    if (means.size() != stds.size())
        throw std::invalid_argument("means/stds length mismatch");
    if (means.size() < 2)
        throw std::invalid_argument("need at least 2 classes");
    for (double m : means)
        if (!std::isfinite(m)) throw std::invalid_argument("non-finite mean");
    for (double s : stds)
        if (!(std::isfinite(s) && s > 0.0))
            throw std::invalid_argument("stds must be finite and positive");
}

} // namespace detail

// One pixel/sample: C means and C strictly positive stds, logit units.
struct ClassGaussians {
    std::vector<double> means;
    std::vector<double> stds;

    ClassGaussians(std::vector<double> m, std::vector<double> s)
        : means(std::move(m)), stds(std::move(s)) {
        detail::check_gaussian_slice(means, stds);
    }

    size_t classes() const { return means.size(); }
};

// H x W x C row-major field of per-class Gaussians. Flat inputs use height=1.
struct GaussianField {
    uint32_t height = 0;
    uint32_t width = 0;
    uint32_t classes = 0;
    std::vector<double> means; // height*width*classes
    std::vector<double> stds;

    GaussianField() = default;
    GaussianField(uint32_t h, uint32_t w, uint32_t c,
                  std::vector<double> m, std::vector<double> s)
        : height(h), width(w), classes(c), means(std::move(m)), stds(std::move(s)) {
        validate();
    }

    uint64_t pixels() const { return uint64_t(height) * width; }

    std::span<const double> means_at(uint64_t pixel) const {
        return {means.data() + pixel * classes, classes};
    }
    std::span<const double> stds_at(uint64_t pixel) const {
        return {stds.data() + pixel * classes, classes};
    }

    void validate() const {
        if (height == 0 || width == 0)
            throw std::invalid_argument("empty field");
        const uint64_t n = pixels() * classes;
        if (means.size() != n || stds.size() != n)
            throw std::invalid_argument("field array length mismatch");
        for (uint64_t p = 0; p < pixels(); ++p)
            detail::check_gaussian_slice(means_at(p), stds_at(p));
    }
};

} // namespace logitconf
