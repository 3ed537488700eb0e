#pragma once

// One-sided (Hestenes) Jacobi SVD. Only used to verify spectral properties in
// tests and debug validation; the orthogonalizers never call it.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace unso {

struct OracleFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SvdResult {
    Matrix u;              // h x h orthogonal
    std::vector<double> s; // h values, descending
    Matrix v;              // w x h, orthonormal columns
};

inline SvdResult jacobi_svd(const Matrix& a, int max_sweeps = 60, double tol = 1e-12)
{
    const std::size_t h = a.rows(), w = a.cols();
    if (h > w)
        throw ShapeError("jacobi_svd: expects rows <= cols");
    if (h > 256)
        throw ShapeError("jacobi_svd: oracle limited to 256 rows");

    // Columns of a^T are the rows of a; work on them in place.
    std::vector<std::vector<double>> cols(h);
    for (std::size_t i = 0; i < h; ++i)
        cols[i].assign(a.row(i).begin(), a.row(i).end());
    Matrix rot = Matrix::identity(h);

    auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += x[i] * y[i];
        return s;
    };

    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < h; ++p) {
            for (std::size_t q = p + 1; q < h; ++q) {
                const double alpha = dot(cols[p], cols[p]);
                const double beta = dot(cols[q], cols[q]);
                const double gamma = dot(cols[p], cols[q]);
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta))
                    continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                auto& bp = cols[p];
                auto& bq = cols[q];
                for (std::size_t i = 0; i < w; ++i) {
                    const double x = bp[i], y = bq[i];
                    bp[i] = c * x - s * y;
                    bq[i] = s * x + c * y;
                }
                for (std::size_t i = 0; i < h; ++i) {
                    const double x = rot(i, p), y = rot(i, q);
                    rot(i, p) = c * x - s * y;
                    rot(i, q) = s * x + c * y;
                }
            }
        }
    }
    if (!converged)
        throw OracleFailure("jacobi_svd: no convergence after " + std::to_string(max_sweeps) + " sweeps");

    std::vector<double> sv(h);
    for (std::size_t i = 0; i < h; ++i)
        sv[i] = std::sqrt(dot(cols[i], cols[i]));
    std::vector<std::size_t> order(h);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    SvdResult out{Matrix(h, h), std::vector<double>(h), Matrix(w, h)};
    const double floor = (sv.empty() ? 0.0 : sv[order[0]]) * 1e-300;
    std::vector<std::size_t> null_cols;
    for (std::size_t j = 0; j < h; ++j) {
        const std::size_t src = order[j];
        out.s[j] = sv[src];
        for (std::size_t i = 0; i < h; ++i)
            out.u(i, j) = rot(i, src);
        if (sv[src] > floor && sv[src] > 0.0) {
            for (std::size_t i = 0; i < w; ++i)
                out.v(i, j) = cols[src][i] / sv[src];
        } else {
            null_cols.push_back(j);
        }
    }

    // Complete v for zero singular values with unit vectors orthogonalized
    // against everything already placed.
    std::size_t basis = 0;
    for (std::size_t j : null_cols) {
        for (; basis < w; ++basis) {
            std::vector<double> cand(w, 0.0);
            cand[basis] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < h; ++k) {
                    if (k == j || (std::find(null_cols.begin(), null_cols.end(), k) != null_cols.end() && k > j))
                        continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < w; ++i)
                        proj += out.v(i, k) * cand[i];
                    for (std::size_t i = 0; i < w; ++i)
                        cand[i] -= proj * out.v(i, k);
                }
            }
            const double n = std::sqrt(dot(cand, cand));
            if (n > 0.5) {
                for (std::size_t i = 0; i < w; ++i)
                    out.v(i, j) = cand[i] / n;
                ++basis;
                break;
            }
        }
    }
    return out;
}

} // namespace unso
