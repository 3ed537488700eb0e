#pragma once

// Dense row-major matrices of doubles with an explicit FLOPs accounting
// channel. Every arithmetic routine takes a FlopsCounter so that benchmark
// totals come from the code that actually ran, not from a separate model.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace unso {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
        if (rows == 0 || cols == 0)
            throw ShapeError("matrix dimensions must be positive");
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (rows == 0 || cols == 0)
            throw ShapeError("matrix dimensions must be positive");
        if (data_.size() != rows * cols)
            throw ShapeError("data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0)
            throw ShapeError("matrix dimensions must be positive");
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw ShapeError("ragged initializer list");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d)
    {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Shape of one recorded product: (m x k) * (k x n).
struct MatmulShape {
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t n = 0;

    bool touches(std::size_t dim) const noexcept { return m == dim || k == dim || n == dim; }
    friend bool operator==(const MatmulShape&, const MatmulShape&) = default;
};

/// Floating-point operation tally for one measurement scope. Not thread-safe;
/// give each concurrent measurement its own counter.
class FlopsCounter {
public:
    void add(std::uint64_t ops) noexcept { total_ += ops; }

    void record_matmul(std::size_t m, std::size_t k, std::size_t n)
    {
        total_ += 2ull * m * k * n;
        matmuls_.push_back({m, k, n});
    }

    std::uint64_t total() const noexcept { return total_; }
    const std::vector<MatmulShape>& matmuls() const noexcept { return matmuls_; }

    /// Number of recorded products with any extent equal to `dim`.
    std::size_t matmuls_touching(std::size_t dim) const
    {
        return static_cast<std::size_t>(std::count_if(
            matmuls_.begin(), matmuls_.end(), [dim](const MatmulShape& s) { return s.touches(dim); }));
    }

    void reset() noexcept
    {
        total_ = 0;
        matmuls_.clear();
    }

private:
    std::uint64_t total_ = 0;
    std::vector<MatmulShape> matmuls_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b, FlopsCounter& counter)
{
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix c(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.row(i).data();
        const double* ai = a.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b.row(p).data();
            for (std::size_t j = 0; j < n; ++j)
                ci[j] += aip * bp[j];
        }
    }
    counter.record_matmul(m, k, n);
    return c;
}

inline Matrix transpose(const Matrix& a)
{
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            t(j, i) = a(i, j);
    return t;
}

/// a * a^T, counted as the product it replaces (rows x cols x rows).
inline Matrix gram(const Matrix& a, FlopsCounter& counter)
{
    const std::size_t h = a.rows(), w = a.cols();
    Matrix g(h, h);
    for (std::size_t i = 0; i < h; ++i) {
        const auto ri = a.row(i);
        for (std::size_t j = 0; j < h; ++j) {
            const auto rj = a.row(j);
            double s = 0.0;
            for (std::size_t p = 0; p < w; ++p)
                s += ri[p] * rj[p];
            g(i, j) = s;
        }
    }
    counter.record_matmul(h, w, h);
    return g;
}

/// Elementwise alpha*a + beta*b. Counts only the work performed: each
/// non-unit scale is one op per entry, the add is one op per entry, and
/// beta == 0 drops b entirely.
inline Matrix axpy_scale(double alpha, const Matrix& a, double beta, const Matrix& b,
                         FlopsCounter& counter)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("axpy_scale: shape mismatch");
    const std::size_t n = a.size();
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    std::uint64_t ops_per_entry = 0;
    if (alpha != 1.0) {
        for (auto& v : o)
            v *= alpha;
        ++ops_per_entry;
    }
    if (beta != 0.0) {
        if (beta == 1.0) {
            for (std::size_t i = 0; i < n; ++i)
                o[i] += bd[i];
            ops_per_entry += 1;
        } else {
            for (std::size_t i = 0; i < n; ++i)
                o[i] += beta * bd[i];
            ops_per_entry += 2;
        }
    }
    counter.add(ops_per_entry * n);
    return out;
}

inline Matrix scale(double alpha, const Matrix& a, FlopsCounter& counter)
{
    Matrix out = a;
    for (auto& v : out.data())
        v *= alpha;
    counter.add(a.size());
    return out;
}

inline double frobenius_norm(const Matrix& a, FlopsCounter& counter)
{
    double s = 0.0;
    for (double v : a.data())
        s += v * v;
    counter.add(2ull * a.size());
    return std::sqrt(s);
}

/// Uncounted norm for test and report code.
inline double frobenius_norm(const Matrix& a)
{
    FlopsCounter scratch;
    return frobenius_norm(a, scratch);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// Text format: "<rows> <cols>" then one line per row. Values are written with
// 17 significant digits, which round-trips every double.

inline std::string format_double(double v, int significant = 17)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, significant);
    return std::string(buf, res.ptr);
}

inline void write_matrix(std::ostream& os, const Matrix& m)
{
    os << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j)
                os << ' ';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

namespace detail {

inline double parse_double(const std::string& tok)
{
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ParseError("not a number: '" + tok + "'");
    return v;
}

inline std::size_t parse_size(const std::string& tok)
{
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("not a non-negative integer: '" + tok + "'");
    return v;
}

} // namespace detail

inline Matrix read_matrix(std::istream& is)
{
    std::string r_tok, c_tok;
    if (!(is >> r_tok >> c_tok))
        throw ParseError("missing matrix header");
    const std::size_t rows = detail::parse_size(r_tok);
    const std::size_t cols = detail::parse_size(c_tok);
    if (rows == 0 || cols == 0)
        throw ParseError("matrix dimensions must be positive");
    if (rows > 4096 || cols > (1u << 20))
        throw ParseError("matrix too large");
    std::vector<double> data;
    data.reserve(rows * cols);
    std::string tok;
    while (data.size() < rows * cols && is >> tok) {
        const double v = detail::parse_double(tok);
        if (!std::isfinite(v))
            throw ParseError("non-finite matrix entry");
        data.push_back(v);
    }
    if (data.size() != rows * cols)
        throw ParseError("expected " + std::to_string(rows * cols) + " entries, got " +
                         std::to_string(data.size()));
    if (is >> tok)
        throw ParseError("trailing data after matrix");
    return Matrix(rows, cols, std::move(data));
}

} // namespace unso
