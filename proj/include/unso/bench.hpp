#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "ortho.hpp"
#include "random.hpp"
#include "scalar_poly.hpp"

namespace unso {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// ||Y Y^T - I||_F for a short-side oriented Y (rows <= cols).
inline double ortho_error(const Matrix& y)
{
    if (y.rows() > y.cols())
        throw ShapeError("ortho_error: expects rows <= cols");
    FlopsCounter scratch;
    Matrix e = gram(y, scratch);
    for (std::size_t i = 0; i < e.rows(); ++i)
        e(i, i) -= 1.0;
    return frobenius_norm(e);
}

/// Error of an orthogonalizer output in whichever orientation it came back.
inline double oriented_error(const Matrix& y)
{
    return y.rows() > y.cols() ? ortho_error(transpose(y)) : ortho_error(y);
}

struct BenchReport {
    std::string method;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t seed_count = 0;
    double error_mean = 0.0;
    std::uint64_t flops = 0;
    std::vector<double> errors;
};

/// Method-major cross product: every shape for the first method, then the next.
inline std::vector<BenchReport> run_table(std::span<const Shape> shapes, std::span<const MethodSpec> methods,
                                          std::span<const std::uint64_t> seeds)
{
    if (shapes.empty() || methods.empty() || seeds.empty())
        throw std::invalid_argument("run_table: shapes, methods and seeds must be non-empty");
    std::vector<BenchReport> out;
    for (const auto& method : methods) {
        for (const auto& shape : shapes) {
            BenchReport rep{method.label(), shape.rows, shape.cols, seeds.size(), 0.0, 0, {}};
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                const auto m = gaussian_matrix(shape.rows, shape.cols, seeds[i]);
                const auto res = orthogonalize(m, method);
                if (i == 0)
                    rep.flops = res.flops;
                else if (res.flops != rep.flops)
                    throw std::logic_error("run_table: FLOPs differ across seeds");
                rep.errors.push_back(oriented_error(res.y));
            }
            double sum = 0.0;
            for (double e : rep.errors)
                sum += e;
            rep.error_mean = sum / static_cast<double>(rep.errors.size());
            out.push_back(std::move(rep));
        }
    }
    return out;
}

inline void write_report_csv(std::ostream& os, std::span<const BenchReport> reports)
{
    os << "method,rows,cols,error_mean,flops\n";
    for (const auto& r : reports)
        os << r.method << ',' << r.rows << ',' << r.cols << ',' << format_double(r.error_mean, 10) << ','
           << r.flops << '\n';
}

// ---------------------------------------------------------------------------
// Closed-form FLOPs, mirroring the counting rules of the kernels exactly.

namespace detail {

inline std::uint64_t axpy_ops(double alpha, double beta, std::uint64_t n)
{
    std::uint64_t per = alpha != 1.0 ? 1 : 0;
    if (beta != 0.0)
        per += beta == 1.0 ? 1 : 2;
    return per * n;
}

} // namespace detail

inline std::uint64_t analytic_flops(const MethodSpec& spec, std::size_t rows, std::size_t cols)
{
    spec.validate();
    const std::uint64_t h = std::min(rows, cols), w = std::max(rows, cols);
    const std::uint64_t hh = h * h, hw = h * w, long_mm = 2 * h * h * w, short_mm = 2 * h * h * h;

    std::uint64_t total = 0;
    bool have_gram = false;
    switch (spec.scaling.kind) {
    case Scaling::FrobeniusPlain:
        total += 2 * hw + hw;
        break;
    case Scaling::FrobeniusGram:
        total += long_mm + 2 * hh + hw + hh;
        have_gram = true;
        break;
    case Scaling::Gelfand:
        total += long_mm + (spec.scaling.gelfand_power - 1) * short_mm + 2 * hh + hw + hh;
        have_gram = true;
        break;
    }

    switch (spec.kind) {
    case MethodKind::Unso: {
        const std::uint64_t n = spec.coeffs.order;
        if (!have_gram)
            total += long_mm;
        total += 2 * hh;                           // I - X X^T
        total += (n - 1) * short_mm + n * 2 * hh;  // squarings + aggregation
        total += long_mm;                          // Y X
        break;
    }
    case MethodKind::OriginalNs:
        total += spec.iterations * (2 * long_mm + detail::axpy_ops(1.5, -0.5, hh));
        break;
    case MethodKind::MuonNs:
    case MethodKind::CesistaNs:
    case MethodKind::ExternalSchedule:
        for (const auto& s : spec.steps()) {
            if (spec.form == StepForm::Nested)
                total += 3 * long_mm + detail::axpy_ops(s.b, s.c, hw) + detail::axpy_ops(s.a, 1.0, hw);
            else
                total += 2 * long_mm + short_mm + detail::axpy_ops(s.b, s.c, hh) + detail::axpy_ops(s.a, 1.0, hw);
        }
        break;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Curves.

struct CurveTable {
    std::vector<double> x;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    void add_column(std::string name, std::vector<double> values)
    {
        if (values.size() != x.size())
            throw std::invalid_argument("curve column length mismatch");
        names.push_back(std::move(name));
        columns.push_back(std::move(values));
    }
};

inline std::vector<double> uniform_grid(std::size_t count, double lo, double hi)
{
    if (count < 2)
        throw std::invalid_argument("grid needs at least two points");
    if (!(lo < hi))
        throw std::invalid_argument("grid needs lo < hi");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    g.back() = hi;
    return g;
}

inline CurveTable sample_curves(std::span<const MethodSpec> methods, std::size_t grid_size = 2000,
                                double lo = 0.0005, double hi = 1.0)
{
    CurveTable t;
    t.x = uniform_grid(grid_size, lo, hi);
    for (const auto& m : methods) {
        m.validate();
        std::vector<double> col;
        col.reserve(t.x.size());
        for (double x : t.x)
            col.push_back(scalar_map(m, x));
        t.add_column(m.label(), std::move(col));
    }
    return t;
}

enum class TermGrowth { Linear, Exponential };

struct TermCurves {
    CurveTable table;                  // f1..fN, then f1_norm..fN_norm
    std::vector<ExtremePoint> extremes;
};

/// Term shapes x (1 - x^2)^(n_k) with n_k = k or 2^(k-1), plus each peak.
inline TermCurves sample_term_curves(int order, TermGrowth growth, std::size_t grid_size = 2000)
{
    if (order < 1 || order > 40)
        throw std::invalid_argument("term curves need 1 <= N <= 40");
    TermCurves out;
    out.table.x = uniform_grid(grid_size, 0.0, 1.0);
    std::vector<std::vector<double>> raw;
    for (int k = 1; k <= order; ++k) {
        const double n = growth == TermGrowth::Linear ? static_cast<double>(k) : std::ldexp(1.0, k - 1);
        if (growth == TermGrowth::Exponential) {
            out.extremes.push_back(term_extreme(k));
        } else {
            const double xs = 1.0 / std::sqrt(2.0 * n + 1.0);
            out.extremes.push_back({xs, xs * std::pow(2.0 * n / (2.0 * n + 1.0), n)});
        }
        std::vector<double> col;
        col.reserve(grid_size);
        for (double x : out.table.x) {
            if (growth == TermGrowth::Exponential) {
                col.push_back(term(k, x));
            } else {
                const double p = 1.0 - x * x;
                double acc = 1.0;
                for (int i = 0; i < k; ++i)
                    acc *= p;
                col.push_back(x * acc);
            }
        }
        raw.push_back(std::move(col));
    }
    for (int k = 1; k <= order; ++k)
        out.table.add_column("f" + std::to_string(k), raw[k - 1]);
    for (int k = 1; k <= order; ++k) {
        auto col = raw[k - 1];
        for (auto& v : col)
            v /= out.extremes[k - 1].y;
        out.table.add_column("f" + std::to_string(k) + "_norm", std::move(col));
    }
    return out;
}

inline void write_curves_csv(std::ostream& os, const CurveTable& t)
{
    os << 'x';
    for (const auto& n : t.names)
        os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        os << format_double(t.x[i], 10);
        for (const auto& c : t.columns)
            os << ',' << format_double(c[i], 10);
        os << '\n';
    }
}

} // namespace unso
