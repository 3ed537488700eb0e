#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "unso/iteration_steps.hpp"

using namespace unso;

TEST(QuinticStep, MuonAtOne)
{
    EXPECT_NEAR(kMuonStep(1.0), 0.7010, 1e-12);
}

TEST(QuinticStep, OriginalNsChain)
{
    double x = 0.5;
    x = kOriginalNsStep(x);
    EXPECT_DOUBLE_EQ(x, 0.6875);
    // Exact rational iterates: 0.5 -> 11/16 -> 7117/8192 -> ...
    x = kOriginalNsStep(x);
    EXPECT_DOUBLE_EQ(x, 7117.0 / 8192.0);
    x = kOriginalNsStep(x);
    EXPECT_NEAR(x, 0.97529963081888128, 1e-15);
}

TEST(CesistaStep, ExpansionMatchesFactoredFormOnGrid)
{
    for (const CesistaStep s : {CesistaStep{1.0, 0.0, 0.0}, CesistaStep{2.3, 0.4, -0.2}, CesistaStep{-0.7, 1.1, 0.9}}) {
        const auto q = expand(s);
        for (int i = 0; i < 20; ++i) {
            const double x = i / 19.0;
            const double factored =
                x + s.gamma * x * (x * x - (1 + s.r) * (1 + s.r)) * (x * x - (1 - s.l) * (1 - s.l));
            EXPECT_NEAR(q(x), factored, 1e-12);
            EXPECT_NEAR(s(x), factored, 1e-12);
        }
    }
}

TEST(CesistaStep, Examples)
{
    const CesistaStep id{0.0, 0.3, 0.1};
    EXPECT_EQ(id(0.42), 0.42);
    const CesistaStep one{1.0, 0.0, 0.0};
    EXPECT_NEAR(one(1.0), 1.0, 1e-15);
    EXPECT_EQ(one(0.0), 0.0);
}

TEST(CesistaStep, ReparameterizeInvertsExpand)
{
    const auto back = expand(reparameterize(kMuonStep));
    EXPECT_NEAR(back.a, kMuonStep.a, 1e-12);
    EXPECT_NEAR(back.b, kMuonStep.b, 1e-12);
    EXPECT_NEAR(back.c, kMuonStep.c, 1e-12);
}

TEST(Compose, MuonFiveSteps)
{
    const std::vector<QuinticStep> steps(5, kMuonStep);
    double x = 1.0;
    for (int i = 0; i < 5; ++i)
        x = 3.4445 * x - 4.7750 * x * x * x + 2.0315 * std::pow(x, 5);
    EXPECT_NEAR(compose<QuinticStep>(steps, 1.0), x, 1e-14);
}

TEST(StepFiles, RoundTrip)
{
    const std::vector<CesistaStep> cs{{1.5, 0.2, -0.1}, {0.3, 1.0, 0.5}};
    std::stringstream a;
    write_cesista_steps(a, cs);
    const auto back = read_cesista_steps(a);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].l, 0.5);
    EXPECT_EQ(back[0].gamma, 1.5);

    const std::vector<QuinticStep> qs{kMuonStep, kOriginalNsStep};
    std::stringstream b;
    write_schedule(b, qs);
    const auto qb = read_schedule(b);
    ASSERT_EQ(qb.size(), 2u);
    EXPECT_EQ(qb[0].c, kMuonStep.c);
}

TEST(StepFiles, KindMismatchIsParseError)
{
    std::istringstream in("schedule 1\n1 2 3\n");
    EXPECT_THROW(read_cesista_steps(in), ParseError);
    std::istringstream short_in("cesista 2\n1 2 3\n");
    EXPECT_THROW(read_cesista_steps(short_in), ParseError);
}
