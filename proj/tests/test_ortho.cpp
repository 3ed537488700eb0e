#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "unso/bench.hpp"
#include "unso/ortho.hpp"
#include "unso/random.hpp"
#include "unso/svd.hpp"

using namespace unso;

namespace {

CoefficientSet shipped()
{
    std::ifstream in(UNSO_DATA_DIR "/unso_n14.txt");
    return read_coefficients(in);
}

Matrix orthonormal_rows(std::size_t h, std::size_t w, std::uint64_t seed)
{
    const auto r = jacobi_svd(gaussian_matrix(h, w, seed));
    return transpose(r.v);
}

} // namespace

TEST(Preprocess, IdentityWithGramScaling)
{
    FlopsCounter c;
    const auto p = preprocess(Matrix::identity(2), {Scaling::FrobeniusGram}, c);
    const double s = std::pow(2.0, -0.25);
    EXPECT_LT(max_abs_diff(p.x, Matrix{{s, 0}, {0, s}}), 1e-15);
    ASSERT_TRUE(p.gram.has_value());
    FlopsCounter scratch;
    EXPECT_LT(max_abs_diff(*p.gram, gram(p.x, scratch)), 1e-15);
}

TEST(Preprocess, TallInputIsTransposed)
{
    FlopsCounter c;
    const auto p = preprocess(gaussian_matrix(512, 128, 0), {Scaling::FrobeniusPlain}, c);
    EXPECT_TRUE(p.was_transposed);
    EXPECT_EQ(p.x.rows(), 128u);
    EXPECT_EQ(p.x.cols(), 512u);
}

TEST(Preprocess, GelfandBoundsTopSingularValue)
{
    FlopsCounter c;
    const auto p = preprocess(Matrix{{3, 0}, {0, 1}}, {Scaling::Gelfand, 2}, c);
    EXPECT_NEAR(p.x(0, 0), 3 / std::pow(std::pow(3.0, 8) + 1, 0.125), 1e-15);
    EXPECT_LE(p.x(0, 0), 1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        for (int k : {1, 2, 3}) {
            const auto q = preprocess(gaussian_matrix(12, 20, seed), {Scaling::Gelfand, k}, c);
            EXPECT_LE(jacobi_svd(q.x).s[0], 1.0 + 1e-12);
        }
}

TEST(Preprocess, ZeroMatrixIsDegenerate)
{
    FlopsCounter c;
    for (auto s : {Scaling::FrobeniusGram, Scaling::FrobeniusPlain, Scaling::Gelfand})
        EXPECT_THROW(preprocess(Matrix(3, 4), {s}, c), DegenerateInput);
}

TEST(Unso, OrthonormalRowsAreFixed)
{
    FlopsCounter c;
    const auto q = orthonormal_rows(6, 10, 1);
    EXPECT_LT(max_abs_diff(unso::unso(q, shipped(), c), q), 1e-12);
}

TEST(Unso, DiagonalMapsThroughScalarF)
{
    const CoefficientSet c{3, {0.0, 0.0}, BRule::Exact};
    FlopsCounter counter;
    Matrix x = Matrix::identity(4);
    for (double& v : x.data())
        v *= 0.5;
    const auto y = unso::unso(x, c, counter);
    const double f = eval_f(c, 0.5);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            EXPECT_NEAR(y(i, j), i == j ? f : 0.0, 1e-15);
}

TEST(Unso, SpectralMappingOracle16x24)
{
    const auto coeffs = shipped();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        FlopsCounter c;
        const auto pre = preprocess(gaussian_matrix(16, 24, seed), {Scaling::FrobeniusGram}, c);
        const auto y = unso::unso(pre.x, coeffs, c);
        const auto sx = jacobi_svd(pre.x).s, sy = jacobi_svd(y).s;
        // f is not monotone near 1, so compare sorted spectra.
        std::vector<double> mapped;
        for (double s : sx)
            mapped.push_back(eval_f(coeffs, s));
        std::sort(mapped.rbegin(), mapped.rend());
        for (std::size_t i = 0; i < sx.size(); ++i)
            EXPECT_NEAR(sy[i], mapped[i], 1e-8);
    }
}

TEST(Unso, TwoLongSideProductsForAnyOrder)
{
    for (int n : {1, 2, 5, 14, 20}) {
        FlopsCounter c;
        const auto pre = preprocess(gaussian_matrix(8, 40, 3), {Scaling::FrobeniusGram}, c);
        unso::unso(pre.x, CoefficientSet::constant(n, 0.1), c, &*pre.gram);
        EXPECT_EQ(c.matmuls_touching(40), 2u) << n;
        EXPECT_EQ(c.matmuls().size(), static_cast<std::size_t>(n + 1));
    }
}

TEST(OriginalNs, OrthonormalRowsAreFixed)
{
    FlopsCounter c;
    const auto q = orthonormal_rows(5, 9, 2);
    EXPECT_LT(max_abs_diff(original_ns(q, 8, c), q), 1e-12);
}

TEST(MuonNs, ZeroStaysZero)
{
    FlopsCounter c;
    EXPECT_EQ(muon_ns(Matrix(3, 5), 5, c), Matrix(3, 5));
}

TEST(MuonNs, FlopsAt128x128)
{
    const auto r = orthogonalize(gaussian_matrix(128, 128, 0), MethodSpec::muon_ns());
    EXPECT_NEAR(static_cast<double>(r.flops), 6.332e7, 0.02 * 6.332e7);
}

TEST(MuonNs, FormsAgree)
{
    FlopsCounter a, b;
    auto x = gaussian_matrix(6, 11, 8);
    x = scale(1.0 / frobenius_norm(x), x, a);
    EXPECT_LT(max_abs_diff(muon_ns(x, 5, a, StepForm::Nested), muon_ns(x, 5, b, StepForm::Gram)), 1e-12);
    EXPECT_EQ(b.matmuls_touching(11), 10u);
    EXPECT_EQ(a.matmuls_touching(11), 15u);
}

TEST(CesistaNs, ZeroGammaIsIdentity)
{
    FlopsCounter c;
    const auto x = gaussian_matrix(4, 7, 1);
    const std::vector<CesistaStep> steps(3, CesistaStep{0.0, 0.2, 0.1});
    EXPECT_EQ(cesista_ns(x, steps, c), x);
}

TEST(Orthogonalize, RestoresTallShape)
{
    const auto r = orthogonalize(gaussian_matrix(512, 128, 4), MethodSpec::unso(shipped()));
    EXPECT_TRUE(r.was_transposed);
    EXPECT_EQ(r.y.rows(), 512u);
    EXPECT_EQ(r.y.cols(), 128u);
}

TEST(Orthogonalize, TransposeEquivariance)
{
    for (const auto& spec : {MethodSpec::unso(shipped()), MethodSpec::original_ns(), MethodSpec::muon_ns()}) {
        const auto m = gaussian_matrix(7, 13, 5);
        const auto a = orthogonalize(m, spec), b = orthogonalize(transpose(m), spec);
        EXPECT_LT(max_abs_diff(transpose(a.y), b.y), 1e-13) << spec.label();
        EXPECT_EQ(a.flops, b.flops);
    }
}

TEST(Orthogonalize, ErrorInvariantUnderOrthogonalTransforms)
{
    // Left and right orthogonal factors leave singular values unchanged.
    const auto m = gaussian_matrix(6, 9, 6);
    const auto u = orthonormal_rows(6, 6, 10), v = orthonormal_rows(9, 9, 11);
    FlopsCounter c;
    const auto rotated = matmul(matmul(u, m, c), v, c);
    const auto spec = MethodSpec::unso(shipped());
    EXPECT_NEAR(ortho_error(orthogonalize(m, spec).y), ortho_error(orthogonalize(rotated, spec).y), 1e-10);
}

TEST(Orthogonalize, UnsoErrorAt128x512)
{
    const auto r = orthogonalize(gaussian_matrix(128, 512, 0), MethodSpec::unso(shipped()));
    EXPECT_LE(ortho_error(r.y), 0.1);
}

TEST(Orthogonalize, ValidationIsQuietForBoundedScalings)
{
    // Every supported scaling bounds sigma_1 by 1, so the oracle never fires.
    for (auto kind : {Scaling::FrobeniusGram, Scaling::FrobeniusPlain, Scaling::Gelfand}) {
        auto spec = MethodSpec::muon_ns();
        spec.scaling = {kind};
        spec.validate_spectrum = true;
        EXPECT_TRUE(orthogonalize(gaussian_matrix(10, 30, 1), spec).warnings.empty());
    }
}
