#pragma once

// Matrix orthogonalizers: shared preprocessing, the single-pass UNSO kernel,
// and the iterative Newton-Schulz baselines. All kernels work on the
// short-side orientation (rows <= cols) so that Gram products are h x h.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iteration_steps.hpp"
#include "matrix.hpp"
#include "scalar_poly.hpp"
#include "svd.hpp"

namespace unso {

struct DegenerateInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Scaling {
    FrobeniusGram,  // A / ||A A^T||_F^(1/2)
    FrobeniusPlain, // A / ||A||_F
    Gelfand,        // A / ||(A A^T)^k||_F^(1/(2k))
};

struct ScalingSpec {
    Scaling kind = Scaling::FrobeniusGram;
    int gelfand_power = 2;
};

enum class MethodKind { Unso, OriginalNs, MuonNs, CesistaNs, ExternalSchedule };

/// How a quintic step is evaluated. Both are spectrally identical.
///   Nested: G = X X^T, then a X + b (G X) + c (G (G X)); three long-side products.
///   Gram:   G = X X^T, B = b G + c G G, then a X + B X;   two long-side products.
enum class StepForm { Nested, Gram };

struct MethodSpec {
    MethodKind kind = MethodKind::Unso;
    int iterations = 0;
    CoefficientSet coeffs;
    std::vector<CesistaStep> cesista;
    std::vector<QuinticStep> schedule;
    ScalingSpec scaling;
    StepForm form = StepForm::Nested;
    bool validate_spectrum = false;

    static MethodSpec unso(CoefficientSet c)
    {
        MethodSpec m;
        m.kind = MethodKind::Unso;
        m.coeffs = std::move(c);
        m.scaling = {Scaling::FrobeniusGram};
        return m;
    }

    static MethodSpec original_ns(int iterations = 8)
    {
        MethodSpec m;
        m.kind = MethodKind::OriginalNs;
        m.iterations = iterations;
        m.scaling = {Scaling::FrobeniusPlain};
        return m;
    }

    static MethodSpec muon_ns(int iterations = 5)
    {
        MethodSpec m;
        m.kind = MethodKind::MuonNs;
        m.iterations = iterations;
        m.scaling = {Scaling::FrobeniusPlain};
        return m;
    }

    static MethodSpec cesista_ns(std::vector<CesistaStep> steps)
    {
        MethodSpec m;
        m.kind = MethodKind::CesistaNs;
        m.iterations = static_cast<int>(steps.size());
        m.cesista = std::move(steps);
        m.scaling = {Scaling::FrobeniusPlain};
        return m;
    }

    static MethodSpec external_schedule(std::vector<QuinticStep> steps)
    {
        MethodSpec m;
        m.kind = MethodKind::ExternalSchedule;
        m.iterations = static_cast<int>(steps.size());
        m.schedule = std::move(steps);
        m.scaling = {Scaling::FrobeniusPlain};
        return m;
    }

    /// Per-step quintics for the iterative kinds (empty for Unso).
    std::vector<QuinticStep> steps() const
    {
        switch (kind) {
        case MethodKind::Unso: return {};
        case MethodKind::OriginalNs: return std::vector<QuinticStep>(iterations, kOriginalNsStep);
        case MethodKind::MuonNs: return std::vector<QuinticStep>(iterations, kMuonStep);
        case MethodKind::CesistaNs: return expand(cesista);
        case MethodKind::ExternalSchedule: return schedule;
        }
        return {};
    }

    std::string label() const
    {
        switch (kind) {
        case MethodKind::Unso: return "unso";
        case MethodKind::OriginalNs: return "original_ns";
        case MethodKind::MuonNs: return "muon_ns";
        case MethodKind::CesistaNs: return "cesista_ns";
        case MethodKind::ExternalSchedule: return "schedule";
        }
        return "?";
    }

    void validate() const
    {
        if (kind == MethodKind::Unso) {
            coeffs.validate();
            return;
        }
        if (iterations < 1)
            throw std::invalid_argument(label() + ": iterations must be >= 1");
        if (kind == MethodKind::CesistaNs && cesista.size() != static_cast<std::size_t>(iterations))
            throw std::invalid_argument("cesista_ns: step count mismatch");
        if (kind == MethodKind::ExternalSchedule && schedule.size() != static_cast<std::size_t>(iterations))
            throw std::invalid_argument("schedule: step count mismatch");
        if (scaling.kind == Scaling::Gelfand && scaling.gelfand_power < 1)
            throw std::invalid_argument("gelfand power must be >= 1");
    }
};

/// Composed scalar map a method applies to every singular value.
inline double scalar_map(const MethodSpec& spec, double x)
{
    if (spec.kind == MethodKind::Unso)
        return eval_poly(spec.coeffs, derive_b(spec.coeffs), x);
    const auto steps = spec.steps();
    return compose<QuinticStep>(steps, x);
}

struct Preprocessed {
    Matrix x;
    bool was_transposed = false;
    std::optional<Matrix> gram; // x x^T when the scaling already produced it
};

inline Preprocessed preprocess(const Matrix& m, ScalingSpec scaling, FlopsCounter& counter)
{
    Preprocessed out;
    out.was_transposed = m.rows() > m.cols();
    const Matrix a = out.was_transposed ? transpose(m) : m;

    auto check = [](double s) {
        if (!(s > 0.0) || !std::isfinite(s))
            throw DegenerateInput("cannot scale a zero or non-finite matrix");
    };

    switch (scaling.kind) {
    case Scaling::FrobeniusPlain: {
        const double s = frobenius_norm(a, counter);
        check(s);
        out.x = scale(1.0 / s, a, counter);
        break;
    }
    case Scaling::FrobeniusGram: {
        const Matrix g = gram(a, counter);
        const double n = frobenius_norm(g, counter);
        check(n);
        out.x = scale(1.0 / std::sqrt(n), a, counter);
        out.gram = scale(1.0 / n, g, counter);
        break;
    }
    case Scaling::Gelfand: {
        if (scaling.gelfand_power < 1)
            throw std::invalid_argument("gelfand power must be >= 1");
        const Matrix g = gram(a, counter);
        Matrix p = g;
        for (int i = 1; i < scaling.gelfand_power; ++i)
            p = matmul(p, g, counter);
        const double n = frobenius_norm(p, counter);
        check(n);
        const double sigma = std::pow(n, 1.0 / (2.0 * scaling.gelfand_power));
        check(sigma);
        out.x = scale(1.0 / sigma, a, counter);
        out.gram = scale(1.0 / (sigma * sigma), g, counter);
        break;
    }
    }
    return out;
}

namespace detail {

/// y += alpha * x, always counted as a multiply and an add per entry.
inline void accumulate(Matrix& y, double alpha, const Matrix& x, FlopsCounter& counter)
{
    auto yd = y.data();
    auto xd = x.data();
    for (std::size_t i = 0; i < yd.size(); ++i)
        yd[i] += alpha * xd[i];
    counter.add(2ull * yd.size());
}

} // namespace detail

/// Y = [I + sum_k a_k P^(2^(k-1)) + c P^(2^(N-1))] X with P = I - X X^T.
/// The powers come from N-1 squarings of the h x h projector; only the
/// Gram product and the final multiply touch the long dimension.
inline Matrix unso(const Matrix& x, const CoefficientSet& coeffs, FlopsCounter& counter,
                   const Matrix* precomputed_gram = nullptr)
{
    coeffs.validate();
    if (x.rows() > x.cols())
        throw ShapeError("unso: expects rows <= cols");
    const std::size_t h = x.rows();
    const Matrix id = Matrix::identity(h);
    const double last = derive_b(coeffs);

    Matrix power = precomputed_gram ? axpy_scale(1.0, id, -1.0, *precomputed_gram, counter)
                                    : axpy_scale(1.0, id, -1.0, gram(x, counter), counter);
    Matrix acc = id;
    for (int k = 1; k <= coeffs.order; ++k) {
        if (k > 1)
            power = matmul(power, power, counter);
        detail::accumulate(acc, k < coeffs.order ? coeffs.a[k - 1] : last, power, counter);
    }
    return matmul(acc, x, counter);
}

/// X <- 1/2 (3I - X X^T) X, evaluated on the short-side Gram.
inline Matrix original_ns(Matrix x, int iterations, FlopsCounter& counter)
{
    const Matrix id = Matrix::identity(x.rows());
    for (int it = 0; it < iterations; ++it) {
        const Matrix g = gram(x, counter);
        const Matrix b = axpy_scale(1.5, id, -0.5, g, counter);
        x = matmul(b, x, counter);
    }
    return x;
}

inline Matrix quintic_step(const Matrix& x, const QuinticStep& s, StepForm form, FlopsCounter& counter)
{
    const Matrix g = gram(x, counter);
    if (form == StepForm::Nested) {
        const Matrix gx = matmul(g, x, counter);
        const Matrix ggx = matmul(g, gx, counter);
        return axpy_scale(s.a, x, 1.0, axpy_scale(s.b, gx, s.c, ggx, counter), counter);
    }
    const Matrix gg = matmul(g, g, counter);
    const Matrix poly = axpy_scale(s.b, g, s.c, gg, counter);
    return axpy_scale(s.a, x, 1.0, matmul(poly, x, counter), counter);
}

inline Matrix quintic_iteration(Matrix x, std::span<const QuinticStep> steps, StepForm form,
                                FlopsCounter& counter)
{
    for (const auto& s : steps)
        x = quintic_step(x, s, form, counter);
    return x;
}

inline Matrix muon_ns(const Matrix& x, int iterations, FlopsCounter& counter, StepForm form = StepForm::Nested)
{
    const std::vector<QuinticStep> steps(iterations, kMuonStep);
    return quintic_iteration(x, steps, form, counter);
}

inline Matrix cesista_ns(const Matrix& x, std::span<const CesistaStep> steps, FlopsCounter& counter,
                         StepForm form = StepForm::Nested)
{
    return quintic_iteration(x, expand(steps), form, counter);
}

struct OrthoResult {
    Matrix y;
    std::uint64_t flops = 0;
    bool was_transposed = false;
    std::vector<MatmulShape> products;
    std::vector<std::string> warnings;
};

inline OrthoResult orthogonalize(const Matrix& m, const MethodSpec& spec)
{
    spec.validate();
    FlopsCounter counter;
    auto pre = preprocess(m, spec.scaling, counter);

    OrthoResult result;
    result.was_transposed = pre.was_transposed;
    if (spec.validate_spectrum && pre.x.rows() <= 256) {
        const auto svd = jacobi_svd(pre.x);
        if (!svd.s.empty() && svd.s.front() > 1.0 + 1e-12)
            result.warnings.push_back("scaled input has singular value " + format_double(svd.s.front(), 6) +
                                      " > 1");
    }

    Matrix y;
    switch (spec.kind) {
    case MethodKind::Unso:
        y = unso(pre.x, spec.coeffs, counter, pre.gram ? &*pre.gram : nullptr);
        break;
    case MethodKind::OriginalNs:
        y = original_ns(std::move(pre.x), spec.iterations, counter);
        break;
    case MethodKind::MuonNs:
    case MethodKind::CesistaNs:
    case MethodKind::ExternalSchedule:
        y = quintic_iteration(std::move(pre.x), spec.steps(), spec.form, counter);
        break;
    }
    result.y = pre.was_transposed ? transpose(y) : std::move(y);
    result.flops = counter.total();
    result.products = counter.matmuls();
    return result;
}

} // namespace unso
