#pragma once

// The scalar polynomial that UNSO applies to every singular value:
//
//   f(x) = x + sum_{k=1}^{N-1} a_k x (1 - x^2)^(2^(k-1)) + b x (1 - x^2)^(2^(N-1))
//
// The last coefficient b is never free; it is re-derived from a_1..a_{N-1}
// by one of three rules so that f reaches 1 near x = 1/sqrt(2^N + 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "matrix.hpp"

namespace unso {

enum class BRule {
    Exact,    // f(1/sqrt(2^N+1)) == 1 exactly
    Approx,   // e^(1/2) (2^(N/2) - 1) - sum a_k
    AbsAlg1,  // e^(1/2) (2^(N/2) - 1) - sum |a_k|
};

inline std::string_view to_string(BRule r)
{
    switch (r) {
    case BRule::Exact: return "exact";
    case BRule::Approx: return "approx";
    case BRule::AbsAlg1: return "alg1-abs";
    }
    return "?";
}

inline std::optional<BRule> parse_b_rule(std::string_view s)
{
    if (s == "exact") return BRule::Exact;
    if (s == "approx") return BRule::Approx;
    if (s == "alg1-abs") return BRule::AbsAlg1;
    return std::nullopt;
}

struct CoefficientSet {
    int order = 14;          // N
    std::vector<double> a;   // a_1 .. a_{N-1}
    BRule rule = BRule::AbsAlg1;

    static CoefficientSet constant(int order, double value, BRule rule = BRule::AbsAlg1)
    {
        CoefficientSet c{order, std::vector<double>(order > 0 ? order - 1 : 0, value), rule};
        c.validate();
        return c;
    }

    void validate() const
    {
        if (order < 1 || order > 40)
            throw std::invalid_argument("polynomial order must be in [1, 40]");
        if (a.size() != static_cast<std::size_t>(order - 1))
            throw std::invalid_argument("expected " + std::to_string(order - 1) + " coefficients, got " +
                                        std::to_string(a.size()));
        for (double v : a)
            if (!std::isfinite(v))
                throw std::invalid_argument("non-finite coefficient");
    }

    friend bool operator==(const CoefficientSet&, const CoefficientSet&) = default;
};

namespace detail {

inline void check_unit_interval(double x)
{
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("argument must lie in [0, 1]");
}

} // namespace detail

/// 1/sqrt(2^N + 1): where f_N peaks and where f is pinned to 1.
inline double constraint_point(int order)
{
    return 1.0 / std::sqrt(std::ldexp(1.0, order) + 1.0);
}

/// Writes f_0..f_N at x into out[0..N]; no domain check.
inline void term_values_into(int order, double x, double* out) noexcept
{
    out[0] = x;
    double p = 1.0 - x * x;
    for (int k = 1; k <= order; ++k) {
        out[k] = x * p;
        p *= p;
    }
}

/// All term values f_0..f_N at x in one pass of repeated squaring.
inline std::vector<double> term_values(int order, double x)
{
    detail::check_unit_interval(x);
    std::vector<double> t(order + 1);
    term_values_into(order, x, t.data());
    return t;
}

inline double term(int k, double x)
{
    detail::check_unit_interval(x);
    if (k < 0)
        throw std::invalid_argument("term index must be >= 0");
    if (k == 0)
        return x;
    double p = 1.0 - x * x;
    for (int i = 1; i < k; ++i)
        p *= p;
    return x * p;
}

inline double term_gradient(int k, double x)
{
    detail::check_unit_interval(x);
    if (k < 0)
        throw std::invalid_argument("term index must be >= 0");
    if (k == 0)
        return 1.0;
    // (1-x^2)^(2^(k-1)-1) = prod_{i=0}^{k-2} (1-x^2)^(2^i)
    double p = 1.0 - x * x;
    double acc = 1.0;
    for (int i = 0; i + 1 < k; ++i) {
        acc *= p;
        p *= p;
    }
    return acc * (1.0 - (std::ldexp(1.0, k) + 1.0) * x * x);
}

struct ExtremePoint {
    double x;
    double y;
};

/// Interior maximum of f_k. y is exact, not the e^(-1/2) estimate.
inline ExtremePoint term_extreme(int k)
{
    if (k < 1)
        throw std::invalid_argument("term_extreme needs k >= 1");
    const double m = std::ldexp(1.0, k);
    const double x = 1.0 / std::sqrt(m + 1.0);
    // log1p keeps (m/(m+1))^(m/2) accurate where repeated squaring drifts.
    return {x, x * std::exp(0.5 * m * std::log1p(-1.0 / (m + 1.0)))};
}

inline double derive_b(const CoefficientSet& c)
{
    c.validate();
    const int n = c.order;
    switch (c.rule) {
    case BRule::Exact: {
        const double m = std::ldexp(1.0, n);
        double r = m / (m + 1.0); // r^(2^(k-1)) as k advances
        double sum = 0.0;
        for (int k = 1; k < n; ++k) {
            sum += c.a[k - 1] * r;
            r *= r;
        }
        return (std::sqrt(m + 1.0) - 1.0 - sum) / r;
    }
    case BRule::Approx:
    case BRule::AbsAlg1: {
        double sum = 0.0;
        for (double v : c.a)
            sum += (c.rule == BRule::AbsAlg1) ? std::abs(v) : v;
        return std::exp(0.5) * (std::pow(2.0, n / 2.0) - 1.0) - sum;
    }
    }
    throw std::logic_error("unknown b rule");
}

/// d b / d a_k for k = 1..N-1. The |a_k| subgradient at 0 is taken as 0.
inline std::vector<double> derive_b_gradient(const CoefficientSet& c)
{
    c.validate();
    const int n = c.order;
    std::vector<double> g(n - 1);
    switch (c.rule) {
    case BRule::Exact: {
        const double m = std::ldexp(1.0, n);
        double r = m / (m + 1.0);
        std::vector<double> powers(n - 1);
        for (int k = 1; k < n; ++k) {
            powers[k - 1] = r;
            r *= r;
        }
        for (int k = 1; k < n; ++k)
            g[k - 1] = -powers[k - 1] / r;
        break;
    }
    case BRule::Approx:
        std::fill(g.begin(), g.end(), -1.0);
        break;
    case BRule::AbsAlg1:
        for (int k = 1; k < n; ++k) {
            const double v = c.a[k - 1];
            g[k - 1] = v > 0.0 ? -1.0 : (v < 0.0 ? 1.0 : 0.0);
        }
        break;
    }
    return g;
}

/// The polynomial itself, defined for any real x; no domain check.
inline double eval_poly(const CoefficientSet& c, double b, double x) noexcept
{
    double y = x;
    double p = 1.0 - x * x;
    for (int k = 1; k < c.order; ++k) {
        y += c.a[k - 1] * x * p;
        p *= p;
    }
    return y + b * x * p;
}

/// f(x) with a precomputed b.
inline double eval_f(const CoefficientSet& c, double b, double x)
{
    const auto t = term_values(c.order, x);
    double y = t[0];
    for (int k = 1; k < c.order; ++k)
        y += c.a[k - 1] * t[k];
    return y + b * t[c.order];
}

inline double eval_f(const CoefficientSet& c, double x)
{
    return eval_f(c, derive_b(c), x);
}

inline double constraint_residual(const CoefficientSet& c)
{
    return eval_f(c, constraint_point(c.order)) - 1.0;
}

/// df/da_k = f_k(x) + (db/da_k) f_N(x).
inline std::vector<double> eval_f_gradient_wrt_a(const CoefficientSet& c, double x)
{
    const auto db = derive_b_gradient(c);
    const auto t = term_values(c.order, x);
    std::vector<double> g(c.order - 1);
    for (int k = 1; k < c.order; ++k)
        g[k - 1] = t[k] + db[k - 1] * t[c.order];
    return g;
}

// Coefficient file: "N <rule>" then a_1..a_{N-1}, one per line. b is derived
// on load and never stored.

inline void write_coefficients(std::ostream& os, const CoefficientSet& c)
{
    c.validate();
    os << c.order << ' ' << to_string(c.rule) << '\n';
    for (double v : c.a)
        os << format_double(v) << '\n';
}

inline CoefficientSet read_coefficients(std::istream& is)
{
    std::string n_tok, rule_tok;
    if (!(is >> n_tok >> rule_tok))
        throw ParseError("coefficient file: missing header");
    const auto n = detail::parse_size(n_tok);
    const auto rule = parse_b_rule(rule_tok);
    if (!rule)
        throw ParseError("coefficient file: unknown b rule '" + rule_tok + "'");
    if (n < 1 || n > 40)
        throw ParseError("coefficient file: order out of range");
    CoefficientSet c{static_cast<int>(n), {}, *rule};
    std::string tok;
    while (is >> tok)
        c.a.push_back(detail::parse_double(tok));
    if (c.a.size() != n - 1)
        throw ParseError("coefficient file: expected " + std::to_string(n - 1) + " values, got " +
                         std::to_string(c.a.size()));
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("coefficient file: ") + e.what());
    }
    return c;
}

} // namespace unso
