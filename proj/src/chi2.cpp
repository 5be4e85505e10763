#include "fwid/chi2.hpp"

#include <cmath>
#include <limits>

#include "fwid/errors.hpp"

namespace fwid {

namespace {

// Lower incomplete gamma by power series, for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper incomplete gamma Q(a,x) by Lentz continued fraction, for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw DomainError("gamma_p: need a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_cdf(double x, double df) {
    if (x <= 0.0) return 0.0;
    return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(double prob, double df) {
    if (!(prob > 0.0 && prob < 1.0)) throw DomainError("chi2_quantile: prob in (0,1)");
    if (!(df > 0.0)) throw DomainError("chi2_quantile: df > 0");
    // Bracket then bisect/Newton. The cdf is smooth and strictly increasing.
    double lo = 0.0;
    double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
    while (chi2_cdf(hi, df) < prob) hi *= 2.0;
    double x = df;  // start at the mean
    for (int it = 0; it < 200; ++it) {
        double f = chi2_cdf(x, df) - prob;
        if (f > 0.0) hi = x; else lo = x;
        // Newton step using the chi2 density, guarded by the bracket.
        double pdf = std::exp((0.5 * df - 1.0) * std::log(x) - 0.5 * x
                              - std::lgamma(0.5 * df) - 0.5 * df * 0.6931471805599453);
        double step = (pdf > 0.0) ? f / pdf : 0.0;
        double xn = x - step;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::fabs(xn - x) < 1e-13 * (1.0 + x)) { x = xn; break; }
        x = xn;
    }
    return x;
}

}  // namespace fwid
