#pragma once

#include <cmath>
#include <stdexcept>

namespace gsprt {

/// Standard normal density.
inline double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF via erfc (accurate in both tails).
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

/// Inverse standard normal CDF, absolute accuracy well below 1e-9.
/// Rational initial guess (Acklam) followed by two Newton corrections
/// against the erfc-based CDF.
inline double gaussian_quantile(double z) {
    if (!(z > 0.0 && z < 1.0))
        throw std::domain_error("gaussian_quantile: argument must lie in (0,1)");

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;

    double x;
    if (z < plow) {
        const double u = std::sqrt(-2.0 * std::log(z));
        x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
            ((((dd[0] * u + dd[1]) * u + dd[2]) * u + dd[3]) * u + 1.0);
    } else if (z <= 1.0 - plow) {
        const double u = z - 0.5;
        const double r = u * u;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double u = std::sqrt(-2.0 * std::log(1.0 - z));
        x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
            ((((dd[0] * u + dd[1]) * u + dd[2]) * u + dd[3]) * u + 1.0);
    }

    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - z;
        const double d = normal_pdf(x);
        if (d <= 0.0) break;  // far tail, initial guess already at limit
        x -= e / d;
    }
    return x;
}

}  // namespace gsprt
