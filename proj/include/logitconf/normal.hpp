#pragma once

// Standard normal density, CDF and log-CDF.
//
// The CDF is evaluated through erfc, which keeps full relative accuracy in
// the lower tail (erf would cancel there). Absolute error is far below the
// 1e-10 budget the estimators assume. The log-CDF switches to the Mills
// ratio asymptotic once erfc underflows (x < ~ -37).

#include <cmath>
#include <limits>

namespace logitconf {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

// log(Phi(x)), finite for any finite x.
inline double std_normal_logcdf(double x) {
    if (x > -37.0) {
        return std::log(std_normal_cdf(x));
    }
    // Mills ratio expansion: Phi(x) = phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
    const double inv2 = 1.0 / (x * x);
    const double series = inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)));
    return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log1p(series);
}

} // namespace logitconf
