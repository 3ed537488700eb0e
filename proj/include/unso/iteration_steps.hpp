#pragma once

// Per-step odd polynomials used by the iterative baselines.
//
//   quintic step:  g(x) = a x + b x^3 + c x^5
//   Cesista step:  g(x) = x + gamma x (x^2 - (1+r)^2)(x^2 - (1-l)^2)
//
// Every Cesista step expands to a quintic step, so one matrix kernel serves
// Muon, Cesista and externally supplied schedules.

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "matrix.hpp"

namespace unso {

struct QuinticStep {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double operator()(double x) const noexcept
    {
        const double x2 = x * x;
        return x * (a + x2 * (b + c * x2));
    }

    friend bool operator==(const QuinticStep&, const QuinticStep&) = default;
};

struct CesistaStep {
    double gamma = 0.0;
    double r = 0.0;
    double l = 0.0;

    double operator()(double x) const noexcept
    {
        const double x2 = x * x;
        const double outer = (1.0 + r) * (1.0 + r);
        const double inner = (1.0 - l) * (1.0 - l);
        return x + gamma * x * (x2 - outer) * (x2 - inner);
    }

    friend bool operator==(const CesistaStep&, const CesistaStep&) = default;
};

inline constexpr QuinticStep kMuonStep{3.4445, -4.7750, 2.0315};
inline constexpr QuinticStep kOriginalNsStep{1.5, -0.5, 0.0};

inline QuinticStep expand(const CesistaStep& s) noexcept
{
    const double outer = (1.0 + s.r) * (1.0 + s.r);
    const double inner = (1.0 - s.l) * (1.0 - s.l);
    return {1.0 + s.gamma * outer * inner, -s.gamma * (outer + inner), s.gamma};
}

/// Inverse of expand() for quintics with real roots, e.g. Muon's constants.
inline CesistaStep reparameterize(const QuinticStep& q)
{
    if (q.c == 0.0)
        throw std::invalid_argument("reparameterize: leading coefficient is zero");
    const double sum = -q.b / q.c;
    const double prod = (q.a - 1.0) / q.c;
    const double disc = sum * sum - 4.0 * prod;
    if (disc < 0.0 || prod < 0.0)
        throw std::invalid_argument("reparameterize: roots are not real");
    const double outer = 0.5 * (sum + std::sqrt(disc));
    const double inner = 0.5 * (sum - std::sqrt(disc));
    if (inner < 0.0)
        throw std::invalid_argument("reparameterize: roots are not real");
    return {q.c, std::sqrt(outer) - 1.0, 1.0 - std::sqrt(inner)};
}

inline std::vector<QuinticStep> expand(std::span<const CesistaStep> steps)
{
    std::vector<QuinticStep> out;
    out.reserve(steps.size());
    for (const auto& s : steps)
        out.push_back(expand(s));
    return out;
}

template <class Step>
double compose(std::span<const Step> steps, double x) noexcept
{
    for (const auto& s : steps)
        x = s(x);
    return x;
}

// Step-params file: "<cesista|schedule> T", then T lines of three decimals
// (gamma r l for cesista, a b c for schedule).

inline void write_cesista_steps(std::ostream& os, std::span<const CesistaStep> steps)
{
    os << "cesista " << steps.size() << '\n';
    for (const auto& s : steps)
        os << format_double(s.gamma) << ' ' << format_double(s.r) << ' ' << format_double(s.l) << '\n';
}

inline void write_schedule(std::ostream& os, std::span<const QuinticStep> steps)
{
    os << "schedule " << steps.size() << '\n';
    for (const auto& s : steps)
        os << format_double(s.a) << ' ' << format_double(s.b) << ' ' << format_double(s.c) << '\n';
}

namespace detail {

inline std::vector<std::array<double, 3>> read_step_triples(std::istream& is, std::string_view kind)
{
    std::string k_tok, t_tok;
    if (!(is >> k_tok >> t_tok))
        throw ParseError("step file: missing header");
    if (k_tok != kind)
        throw ParseError("step file: expected '" + std::string(kind) + "', got '" + k_tok + "'");
    const auto count = parse_size(t_tok);
    if (count == 0 || count > 1000)
        throw ParseError("step file: step count out of range");
    std::vector<std::array<double, 3>> rows(count);
    std::string tok;
    for (auto& r : rows)
        for (auto& v : r) {
            if (!(is >> tok))
                throw ParseError("step file: truncated");
            v = parse_double(tok);
            if (!std::isfinite(v))
                throw ParseError("step file: non-finite value");
        }
    if (is >> tok)
        throw ParseError("step file: trailing data");
    return rows;
}

} // namespace detail

inline std::vector<CesistaStep> read_cesista_steps(std::istream& is)
{
    std::vector<CesistaStep> out;
    for (const auto& r : detail::read_step_triples(is, "cesista"))
        out.push_back({r[0], r[1], r[2]});
    return out;
}

inline std::vector<QuinticStep> read_schedule(std::istream& is)
{
    std::vector<QuinticStep> out;
    for (const auto& r : detail::read_step_triples(is, "schedule"))
        out.push_back({r[0], r[1], r[2]});
    return out;
}

} // namespace unso
