// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace cfmm;
using cfmm::testing::random_context;
using cfmm::testing::symmetric_context;
using cfmm::testing::uniform_q;

namespace {

RateContext unit_context()
{
    return make_rate_context(Eigen::MatrixXd::Ones(1, 1), PilotSet::orthogonal(1), 1.0, 1.0);
}

/// SINR straight from the sums, one term at a time.
double reference_sinr(const RateContext& ctx, const Eigen::VectorXd& q, int k)
{
    const int M = ctx.num_aps();
    const int K = ctx.num_users();
    double num = 0.0;
    for (int m = 0; m < M; ++m)
        num += ctx.gamma(m, k);
    num = q(k) * num * num;
    double den = 0.0;
    for (int j = 0; j < K; ++j) {
        if (j != k) {
            double s = 0.0;
            for (int m = 0; m < M; ++m)
                s += ctx.gamma(m, k) * ctx.beta(m, j) / ctx.beta(m, k);
            den += q(j) * s * s * ctx.pilots.overlap(k, j);
        }
        for (int m = 0; m < M; ++m)
            den += q(j) * ctx.gamma(m, k) * ctx.beta(m, j);
    }
    for (int m = 0; m < M; ++m)
        den += ctx.gamma(m, k) / ctx.rho;
    return num / den;
}

} // namespace

TEST(Coefficients, UnitCase)
{
    const auto ctx = unit_context();
    EXPECT_DOUBLE_EQ(ctx.c(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(ctx.gamma(0, 0), 0.5);
}

TEST(Coefficients, VanishingChannel)
{
    const Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(1, 1, 1e-300);
    const auto c = c_coeff(beta, PilotSet::orthogonal(1), 1.0);
    EXPECT_LT(c(0, 0), 1e-299);
    EXPECT_LT(gamma_coeff(beta, c, 1, 1.0)(0, 0), 1e-299);
}

TEST(Coefficients, HighSnrLimit)
{
    const Eigen::MatrixXd beta = Eigen::MatrixXd::Ones(1, 1);
    const auto c = c_coeff(beta, PilotSet::orthogonal(1), 1e6);
    EXPECT_NEAR(gamma_coeff(beta, c, 1, 1e6)(0, 0), 1e6 / (1e6 + 1), 1e-12);
}

TEST(Coefficients, NonOrthogonalPilotsReduceQuality)
{
    Eigen::MatrixXcd phi(1, 2);
    phi << 1.0, 1.0;
    const PilotSet shared = PilotSet::from_sequences(phi);
    EXPECT_DOUBLE_EQ(shared.overlap(0, 1), 1.0);
    const Eigen::MatrixXd beta = Eigen::MatrixXd::Ones(1, 2);
    const auto c_shared = c_coeff(beta, shared, 1.0);
    const auto c_orth = c_coeff(beta, PilotSet{Eigen::MatrixXd::Identity(2, 2), 1}, 1.0);
    EXPECT_LT(c_shared(0, 0), c_orth(0, 0));
    EXPECT_DOUBLE_EQ(c_shared(0, 0), 1.0 / 3.0);
}

TEST(PilotSet, RejectsNonUnitSequences)
{
    Eigen::MatrixXcd phi(2, 1);
    phi << 1.0, 1.0;
    EXPECT_THROW(PilotSet::from_sequences(phi), ValidationError);
}

TEST(UserRate, HandEvaluatedUnitCase)
{
    const auto ctx = unit_context();
    const auto br = sinr_breakdown(ctx, Eigen::VectorXd::Ones(1));
    EXPECT_DOUBLE_EQ(br.sinr()(0), 0.25);
    EXPECT_NEAR(user_rate(ctx, Eigen::VectorXd::Ones(1))(0), std::log2(1.25), 1e-15);
    EXPECT_NEAR(user_rate(ctx, Eigen::VectorXd::Ones(1))(0), 0.3219, 1e-4);
}

TEST(UserRate, ZeroPowerZeroRate)
{
    const auto ctx = random_context(30, 5, 3);
    EXPECT_TRUE(user_rate(ctx, Eigen::VectorXd::Zero(5)).isZero(0.0));
}

TEST(UserRate, SymmetricNetworkEqualRates)
{
    const auto ctx = symmetric_context(10, 4);
    const auto r = user_rate(ctx, Eigen::VectorXd::Constant(4, 0.7));
    for (int k = 1; k < 4; ++k)
        EXPECT_NEAR(r(k), r(0), 1e-14);
    EXPECT_NEAR(min_rate(ctx, Eigen::VectorXd::Constant(4, 0.7)), r(0), 1e-14);
}

TEST(UserRate, MatchesTermByTermSum)
{
    Rng rng(9);
    for (int s = 0; s < 20; ++s) {
        const auto ctx = random_context(8, 4, 100 + s);
        const auto q = uniform_q(4, rng);
        const auto sinr = sinr_breakdown(ctx, q).sinr();
        for (int k = 0; k < 4; ++k)
            EXPECT_NEAR(sinr(k), reference_sinr(ctx, q, k), 1e-12 * sinr(k));
    }
}

TEST(UserRate, RejectsBadAllocation)
{
    const auto ctx = random_context(4, 2, 1);
    EXPECT_THROW(user_rate(ctx, Eigen::VectorXd::Ones(3)), ValidationError);
    EXPECT_THROW(user_rate(ctx, Eigen::VectorXd::Constant(2, 1.5)), ValidationError);
    EXPECT_THROW(user_rate(ctx, Eigen::VectorXd::Constant(2, -0.1)), ValidationError);
}

TEST(RateContext, RejectsNonPositiveBeta)
{
    Eigen::MatrixXd beta = Eigen::MatrixXd::Ones(2, 2);
    beta(1, 1) = 0.0;
    EXPECT_THROW(make_rate_context(beta, reference_config(2, 2)), ValidationError);
    EXPECT_THROW(make_rate_context(Eigen::MatrixXd::Ones(2, 3), PilotSet::orthogonal(2), 1, 1), ValidationError);
}

TEST(MinRate, PicksLowestIndexOnTies)
{
    Eigen::VectorXd r(4);
    r << 2.0, 1.0, 3.0, 1.0;
    const auto m = min_rate_of(r);
    EXPECT_EQ(m.value, 1.0);
    EXPECT_EQ(m.user, 1);
}

TEST(MinRate, OneSilentUser)
{
    const auto ctx = random_context(10, 3, 5);
    Eigen::VectorXd q = Eigen::VectorXd::Ones(3);
    q(2) = 0.0;
    EXPECT_EQ(min_rate(ctx, q), 0.0);
}

TEST(NetThroughput, Overhead)
{
    SystemConfig cfg;
    cfg.pilot_length = 5;
    EXPECT_NEAR(net_throughput(1.0221, cfg), 20e6 * 0.975 / 2 * 1.0221, 1e-6);
    EXPECT_NEAR(net_throughput(1.0221, cfg) / 1e6, 9.965, 1e-3);
    EXPECT_EQ(net_throughput(0.0, cfg), 0.0);
    cfg.pilot_length = 10;
    EXPECT_NEAR(net_throughput(1.0, cfg), 20e6 * 0.95 / 2, 1e-6);
}

TEST(SinrCoefficientsTest, UnitCase)
{
    const auto co = sinr_coefficients(unit_context());
    EXPECT_DOUBLE_EQ(co.A(0), 0.25);
    EXPECT_DOUBLE_EQ(co.B(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(co.C(0), 0.5);
}

TEST(SinrCoefficientsTest, OrthogonalPilotsOnlyBeamformingTerm)
{
    const auto ctx = random_context(6, 3, 8);
    const auto co = sinr_coefficients(ctx);
    const Eigen::MatrixXd bf = ctx.gamma.transpose() * ctx.beta;
    // orthogonal pilots: contamination vanishes, only the beamforming sums remain
    const auto ctx_orth = make_rate_context(ctx.beta, PilotSet::orthogonal(3), ctx.rho, ctx.rho_p);
    EXPECT_TRUE(sinr_coefficients(ctx_orth).B.isApprox(bf, 1e-14));
    EXPECT_TRUE(co.B.isApprox(bf, 1e-14));
}

TEST(SinrCoefficientsTest, MatchesRateModel)
{
    Rng rng(21);
    for (int s = 0; s < 50; ++s) {
        const int K = 2 + s % 5;
        auto ctx = random_context(12, K, 500 + s);
        if (s % 2) {
            // random unit-norm pilots of length 2 so contamination terms appear
            Eigen::MatrixXcd phi = Eigen::MatrixXcd::Random(2, K);
            phi.colwise().normalize();
            ctx = make_rate_context(ctx.beta, PilotSet::from_sequences(phi), ctx.rho, ctx.rho_p);
        }
        const auto co = sinr_coefficients(ctx);
        const auto q = uniform_q(K, rng);
        const auto direct = sinr_breakdown(ctx, q).sinr();
        const auto viaco = co.sinr(q);
        for (int k = 0; k < K; ++k)
            EXPECT_NEAR(viaco(k), direct(k), 1e-12 * direct(k));
    }
}

TEST(Properties, SinrMonotoneInPowers)
{
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 40; ++s) {
        const auto ctx = random_context(20, 4, 900 + s);
        Eigen::VectorXd q = uniform_q(4, rng);
        const auto base = sinr_breakdown(ctx, q).sinr();
        for (int j = 0; j < 4; ++j) {
            Eigen::VectorXd up = q;
            up(j) = q(j) + (1.0 - q(j)) * u(rng) + 1e-3 * (1.0 - q(j));
            up(j) = std::min(up(j), 1.0);
            if (up(j) <= q(j))
                continue;
            const auto s2 = sinr_breakdown(ctx, up).sinr();
            for (int k = 0; k < 4; ++k) {
                if (k == j)
                    EXPECT_GT(s2(k), base(k));
                else
                    EXPECT_LT(s2(k), base(k));
            }
        }
    }
}
