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

#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "cfmm/config.hpp"
#include "cfmm/errors.hpp"

namespace cfmm {

/// Pilot assignment, stored as squared inner-product magnitudes
/// overlap(k, j) = |phi_k^H phi_j|^2 of unit-norm pilot sequences.
struct PilotSet {
    Eigen::MatrixXd overlap;
    int length = 1; // tau

    static PilotSet orthogonal(int num_users)
    {
        require(num_users >= 1, "need at least one user");
        return {Eigen::MatrixXd::Identity(num_users, num_users), num_users};
    }

    /// From explicit sequences, one unit-norm column per user (tau x K).
    static PilotSet from_sequences(const Eigen::MatrixXcd& phi)
    {
        require(phi.cols() >= 1 && phi.rows() >= 1, "empty pilot matrix");
        for (Eigen::Index k = 0; k < phi.cols(); ++k)
            require(std::abs(phi.col(k).squaredNorm() - 1.0) < 1e-9, "pilot sequences must be unit-norm");
        const Eigen::MatrixXcd gram = phi.adjoint() * phi;
        return {gram.cwiseAbs2(), static_cast<int>(phi.rows())};
    }

    int num_users() const { return static_cast<int>(overlap.rows()); }

    void validate() const
    {
        require(overlap.rows() == overlap.cols(), "pilot overlap must be square");
        require(length >= 1, "pilot length must be >= 1");
        for (Eigen::Index k = 0; k < overlap.rows(); ++k) {
            require(std::abs(overlap(k, k) - 1.0) < 1e-9, "pilot overlap diagonal must be 1");
            for (Eigen::Index j = 0; j < overlap.cols(); ++j) {
                require(overlap(k, j) >= 0.0 && overlap(k, j) <= 1.0 + 1e-12, "pilot overlap outside [0,1]");
                require(std::abs(overlap(k, j) - overlap(j, k)) < 1e-12, "pilot overlap must be symmetric");
            }
        }
    }
};

/// MMSE estimator coefficients c (M x K).
inline Eigen::MatrixXd c_coeff(const Eigen::MatrixXd& beta, const PilotSet& pilots, double rho_p)
{
    require(beta.cols() == pilots.num_users(), "beta columns must match pilot count");
    const double tr = pilots.length * rho_p;
    // denom(m, k) = tau rho_p sum_j beta(m, j) |phi_k^H phi_j|^2 + 1
    const Eigen::MatrixXd denom = (tr * (beta * pilots.overlap.transpose())).array() + 1.0;
    return (std::sqrt(tr) * beta.array() / denom.array()).matrix();
}

/// Mean-square of the channel estimate, gamma = sqrt(tau rho_p) beta c.
inline Eigen::MatrixXd gamma_coeff(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& c, int tau,
                                   double rho_p)
{
    require(beta.rows() == c.rows() && beta.cols() == c.cols(), "beta and c shapes differ");
    return (std::sqrt(tau * rho_p) * beta.array() * c.array()).matrix();
}

/// Everything the uplink rate needs for one network realization.
struct RateContext {
    Eigen::MatrixXd beta;
    Eigen::MatrixXd c;
    Eigen::MatrixXd gamma;
    double rho = 1.0;
    double rho_p = 1.0;
    PilotSet pilots;

    int num_aps() const { return static_cast<int>(beta.rows()); }
    int num_users() const { return static_cast<int>(beta.cols()); }
};

inline RateContext make_rate_context(Eigen::MatrixXd beta, PilotSet pilots, double rho, double rho_p)
{
    pilots.validate();
    require(rho > 0 && rho_p > 0, "normalized SNRs must be positive");
    require(beta.rows() >= 1 && beta.cols() == pilots.num_users(), "beta must be M x K");
    require(beta.allFinite() && (beta.array() > 0.0).all(), "beta must be positive and finite");
    RateContext ctx;
    ctx.c = c_coeff(beta, pilots, rho_p);
    ctx.gamma = gamma_coeff(beta, ctx.c, pilots.length, rho_p);
    ctx.beta = std::move(beta);
    ctx.rho = rho;
    ctx.rho_p = rho_p;
    ctx.pilots = std::move(pilots);
    return ctx;
}

inline RateContext make_rate_context(Eigen::MatrixXd beta, const SystemConfig& cfg)
{
    const auto snr = normalized_snr(cfg);
    PilotSet pilots = PilotSet::orthogonal(static_cast<int>(beta.cols()));
    pilots.length = cfg.pilot_length;
    return make_rate_context(std::move(beta), std::move(pilots), snr.data, snr.pilot);
}

inline void validate_allocation(const Eigen::VectorXd& q, int num_users)
{
    require(q.size() == num_users, "power allocation length must equal K");
    for (Eigen::Index k = 0; k < q.size(); ++k)
        require(q(k) >= 0.0 && q(k) <= 1.0, "power coefficients must lie in [0,1]");
}

/// The SINR fraction split into its four groups for a given allocation.
/// SINR_k = signal_k / (contamination_k + beamforming_k + noise_k).
struct SinrBreakdown {
    Eigen::VectorXd signal;
    Eigen::VectorXd contamination;
    Eigen::VectorXd beamforming;
    Eigen::VectorXd noise;

    Eigen::VectorXd sinr() const
    {
        return (signal.array() / (contamination + beamforming + noise).array()).matrix();
    }
};

inline SinrBreakdown sinr_breakdown(const RateContext& ctx, const Eigen::VectorXd& q)
{
    const int K = ctx.num_users();
    const int M = ctx.num_aps();
    require(ctx.gamma.rows() == M && ctx.gamma.cols() == K, "rate context shapes inconsistent");
    validate_allocation(q, K);

    SinrBreakdown out;
    out.signal.resize(K);
    out.contamination.setZero(K);
    out.beamforming.setZero(K);
    out.noise.resize(K);
    for (int k = 0; k < K; ++k) {
        const double gsum = ctx.gamma.col(k).sum();
        out.signal(k) = q(k) * gsum * gsum;
        out.noise(k) = gsum / ctx.rho;
        for (int j = 0; j < K; ++j) {
            double bf = 0.0;
            for (int m = 0; m < M; ++m)
                bf += ctx.gamma(m, k) * ctx.beta(m, j);
            out.beamforming(k) += q(j) * bf;
            if (j != k && ctx.pilots.overlap(k, j) != 0.0) {
                double pc = 0.0;
                for (int m = 0; m < M; ++m)
                    pc += ctx.gamma(m, k) * ctx.beta(m, j) / ctx.beta(m, k);
                out.contamination(k) += q(j) * pc * pc * ctx.pilots.overlap(k, j);
            }
        }
    }
    return out;
}

/// Per-user uplink spectral efficiency in bits/s/Hz.
inline Eigen::VectorXd user_rate(const RateContext& ctx, const Eigen::VectorXd& q)
{
    const Eigen::VectorXd sinr = sinr_breakdown(ctx, q).sinr();
    return sinr.unaryExpr([](double s) { return std::log2(1.0 + s); });
}

struct MinRate {
    double value = 0.0;
    int user = 0; // lowest index among ties
};

inline MinRate min_rate_of(const Eigen::VectorXd& rates)
{
    MinRate out{rates(0), 0};
    for (Eigen::Index k = 1; k < rates.size(); ++k)
        if (rates(k) < out.value)
            out = {rates(k), static_cast<int>(k)};
    return out;
}

inline double min_rate(const RateContext& ctx, const Eigen::VectorXd& q)
{
    return min_rate_of(user_rate(ctx, q)).value;
}

/// Bits/s after pilot overhead and the uplink/downlink split.
inline double net_throughput(double rate, const SystemConfig& cfg)
{
    return cfg.bandwidth_hz * (1.0 - static_cast<double>(cfg.pilot_length) / cfg.coherence_samples) / 2.0
           * rate;
}

// ---------------------------------------------------------------------------

/// Linear-fractional form of the SINR,
///   SINR_k(q) = q_k A_k / ((B q)_k + C_k).
/// B folds both the pilot-contamination and the beamforming-uncertainty
/// terms. Shared by the max-min solver and the neural-network gradients.
struct SinrCoefficients {
    Eigen::VectorXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd C;

    int num_users() const { return static_cast<int>(A.size()); }

    Eigen::VectorXd sinr(const Eigen::VectorXd& q) const
    {
        return (q.array() * A.array() / ((B * q).array() + C.array())).matrix();
    }

    Eigen::VectorXd rates(const Eigen::VectorXd& q) const
    {
        return sinr(q).unaryExpr([](double s) { return std::log2(1.0 + s); });
    }
};

inline SinrCoefficients sinr_coefficients(const RateContext& ctx)
{
    const int K = ctx.num_users();
    const int M = ctx.num_aps();
    SinrCoefficients co;
    const Eigen::VectorXd gsum = ctx.gamma.colwise().sum().transpose();
    co.A = gsum.array().square().matrix();
    co.C = gsum / ctx.rho;
    // beamforming uncertainty: B(k, j) = sum_m gamma(m, k) beta(m, j)
    co.B = ctx.gamma.transpose() * ctx.beta;
    for (int k = 0; k < K; ++k) {
        for (int j = 0; j < K; ++j) {
            if (j == k || ctx.pilots.overlap(k, j) == 0.0)
                continue;
            double pc = 0.0;
            for (int m = 0; m < M; ++m)
                pc += ctx.gamma(m, k) * ctx.beta(m, j) / ctx.beta(m, k);
            co.B(k, j) += pc * pc * ctx.pilots.overlap(k, j);
        }
    }
    return co;
}

} // namespace cfmm
