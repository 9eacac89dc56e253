#include "hwaware/shapiro_wilk.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace hwaware {

namespace {

// c[0] + c[1] x + c[2] x^2 + ...
template <std::size_t N>
double poly(const double (&c)[N], double x) {
    double r = 0.0;
    for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
    return r;
}

constexpr double kG[] = {-2.273, 0.459};
constexpr double kC1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
constexpr double kC2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
constexpr double kC3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
constexpr double kC4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
constexpr double kC5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
constexpr double kC6[] = {-0.4803, -0.082676, 0.0030302};

// Positive half of the antisymmetric coefficient vector: a[i] weights
// x_(n-i) - x_(i+1), i = 0 .. n/2 - 1. Normalised so the full vector has unit norm.
std::vector<double> coefficients(std::size_t n) {
    const std::size_t half = n / 2;
    std::vector<double> a(half);
    if (n == 3) {
        a[0] = std::numbers::sqrt2 / 2.0;
        return a;
    }
    const boost::math::normal std_normal;
    const double an = double(n);
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        m[i] = boost::math::quantile(std_normal, (double(i + 1) - 0.375) / (an + 0.25));
        summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(kC1, rsn) - m[0] / ssumm2;

    std::size_t first_plain;
    double fac;
    if (n > 5) {
        const double a2 = -m[1] / ssumm2 + poly(kC2, rsn);
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                        (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
        a[1] = a2;
        first_plain = 2;
    } else {
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
        first_plain = 1;
    }
    a[0] = a1;
    for (std::size_t i = first_plain; i < half; ++i) a[i] = -m[i] / fac;
    return a;
}

}  // namespace

ShapiroWilkResult shapiro_wilk(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 3 || n > 5000) {
        throw std::invalid_argument("shapiro_wilk requires 3 <= n <= 5000, got n=" +
                                    std::to_string(n));
    }
    std::vector<double> x(samples.begin(), samples.end());
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument("shapiro_wilk: non-finite sample");
    }
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (!(range > 0.0)) {
        throw std::invalid_argument("shapiro_wilk: all samples are identical");
    }

    const auto a = coefficients(n);
    const std::size_t half = n / 2;
    auto coef = [&](std::size_t i) {  // full antisymmetric vector, ascending order
        if (i < half) return -a[i];
        if (n % 2 == 1 && i == half) return 0.0;
        return a[n - 1 - i];
    };

    // W is the squared correlation between the ordered sample and the
    // coefficients. Scaling by the range keeps the sums well conditioned.
    double sa = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += coef(i);
        sx += x[i] / range;
    }
    sa /= double(n);
    sx /= double(n);
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double asa = coef(i) - sa;
        const double xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = std::max(0.0, (ssassx - sax) * (ssassx + sax) / (ssa * ssx));

    ShapiroWilkResult res;
    res.w = 1.0 - w1;

    if (n == 3) {
        // Exact distribution for n = 3.
        constexpr double pi6 = 6.0 / std::numbers::pi;
        constexpr double stqr = std::numbers::pi / 3.0;
        res.p = std::clamp(pi6 * (std::asin(std::sqrt(res.w)) - stqr), 0.0, 1.0);
        return res;
    }
    if (w1 <= 0.0) {
        res.p = 1.0;
        return res;
    }

    const double an = double(n);
    double y = std::log(w1);
    double mean, sd;
    if (n <= 11) {
        const double gamma = poly(kG, an);
        if (y >= gamma) {
            res.p = 1e-99;
            return res;
        }
        y = -std::log(gamma - y);
        mean = poly(kC3, an);
        sd = std::exp(poly(kC4, an));
    } else {
        const double xx = std::log(an);
        mean = poly(kC5, xx);
        sd = std::exp(poly(kC6, xx));
    }
    // Upper tail of N(mean, sd).
    res.p = 0.5 * std::erfc((y - mean) / (sd * std::numbers::sqrt2));
    return res;
}

}  // namespace hwaware
