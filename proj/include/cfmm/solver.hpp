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
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfmm/errors.hpp"
#include "cfmm/rate_model.hpp"

namespace cfmm {

struct SolverTolerances {
    double bisection_rel = 1e-4;   // stop when (hi - lo) / hi < this
    double feasibility_rel = 1e-9; // accept SINR >= t (1 - this)
    double fixed_point_step = 1e-12;
    int max_fixed_point_iterations = 100000;
};

enum class Feasibility { feasible, infeasible, undecided };

inline const char* to_string(Feasibility f)
{
    switch (f) {
    case Feasibility::feasible: return "feasible";
    case Feasibility::infeasible: return "infeasible";
    case Feasibility::undecided: return "undecided";
    }
    return "?";
}

struct FeasibilityResult {
    Feasibility status = Feasibility::undecided;
    Eigen::VectorXd q; // limit of the iteration (also set when infeasible)
    int iterations = 0;
};

struct NoObserver {
    void operator()(const Eigen::VectorXd&) const {}
};

/// Decides whether every user can reach SINR target t within the unit power
/// box. Iterates the standard interference function
///   q_k <- min(1, (t / A_k) ((B q)_k + C_k))
/// from q = 0. The iterates are componentwise non-decreasing and bounded,
/// so they converge to the minimal-power fixed point. `observer` is called
/// with every iterate.
template <class Observer>
FeasibilityResult feasibility_fixed_point(double t, const SinrCoefficients& co, const SolverTolerances& tol,
                                          Observer&& observer)
{
    require(t >= 0.0 && std::isfinite(t), "SINR target must be finite and non-negative");
    const Eigen::Index K = co.A.size();
    const Eigen::ArrayXd scale = t / co.A.array();

    FeasibilityResult out;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd next(K);
    bool converged = false;
    while (out.iterations < tol.max_fixed_point_iterations) {
        next = (scale * ((co.B * q).array() + co.C.array())).min(1.0).matrix();
        ++out.iterations;
        observer(next);
        const double change = (next - q).cwiseAbs().maxCoeff();
        q.swap(next);
        if (change < tol.fixed_point_step) {
            converged = true;
            break;
        }
    }
    out.q = std::move(q);
    if (!converged) {
        out.status = Feasibility::undecided;
        return out;
    }
    const Eigen::VectorXd sinr = co.sinr(out.q);
    const bool ok = (sinr.array() >= t * (1.0 - tol.feasibility_rel)).all();
    out.status = ok ? Feasibility::feasible : Feasibility::infeasible;
    return out;
}

inline FeasibilityResult feasibility_fixed_point(double t, const SinrCoefficients& co,
                                                 const SolverTolerances& tol = {})
{
    return feasibility_fixed_point(t, co, tol, NoObserver{});
}

/// Exact decision through linear algebra. With M = diag(t / A) B >= 0 and
/// b = t C / A > 0, target t is reachable iff (I - M) q = b has a strictly
/// positive solution (then rho(M) < 1 and q is the minimal-power point)
/// that also satisfies q <= 1. The solution is re-checked against the SINR
/// target; a numerically inconsistent answer is reported as undecided.
inline FeasibilityResult feasibility_linear_certificate(double t, const SinrCoefficients& co,
                                                        const SolverTolerances& tol = {})
{
    require(t >= 0.0 && std::isfinite(t), "SINR target must be finite and non-negative");
    const Eigen::Index K = co.A.size();
    FeasibilityResult out;
    if (t == 0.0) {
        out.status = Feasibility::feasible;
        out.q = Eigen::VectorXd::Zero(K);
        return out;
    }
    const Eigen::VectorXd scale = (t / co.A.array()).matrix();
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(K, K) - scale.asDiagonal() * co.B;
    const Eigen::VectorXd rhs = (scale.array() * co.C.array()).matrix();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) {
        out.status = Feasibility::infeasible; // rho(M) = 1: powers would be unbounded
        out.q = Eigen::VectorXd::Ones(K);
        return out;
    }
    Eigen::VectorXd q = lu.solve(rhs);
    if (!q.allFinite() || (q.array() <= 0.0).any() || (q.array() > 1.0 + tol.feasibility_rel).any()) {
        out.status = Feasibility::infeasible;
        out.q = q.allFinite() ? Eigen::VectorXd(q.cwiseMax(0.0).cwiseMin(1.0)) : Eigen::VectorXd::Ones(K);
        return out;
    }
    out.q = q.cwiseMin(1.0);
    const bool ok = (co.sinr(out.q).array() >= t * (1.0 - tol.feasibility_rel)).all();
    out.status = ok ? Feasibility::feasible : Feasibility::undecided;
    return out;
}

struct BisectionStep {
    double t = 0.0;
    Feasibility status = Feasibility::undecided;
    int fixed_point_iterations = 0;
    // The fixed point hit its iteration cap and the step was settled by
    // feasibility_linear_certificate instead.
    bool certified = false;
};

struct MaxMinSolution {
    // Feasible allocation at t_star, scaled so its largest entry is 1.
    Eigen::VectorXd q_star;
    // Minimal-power allocation reaching t_star (the fixed point itself).
    Eigen::VectorXd q_min_power;
    double t_star = 0.0; // certified common SINR (linear)
    double rate_star = 0.0;
    double t_upper = 0.0; // smallest target observed infeasible, or t_max
    int bisection_iterations = 0;
    std::vector<BisectionStep> trace;
};

class UndecidedFeasibility : public SolverError {
public:
    UndecidedFeasibility(const std::string& what, std::vector<BisectionStep> trace)
        : SolverError(what), trace_(std::move(trace))
    {
    }
    const std::vector<BisectionStep>& trace() const { return trace_; }

private:
    std::vector<BisectionStep> trace_;
};

/// Interference-free, full-power bound on any achievable common SINR.
inline double sinr_upper_bound(const SinrCoefficients& co)
{
    return (co.A.array() / co.C.array()).maxCoeff();
}

/// Global optimum of the max-min rate problem by bisection on the common
/// SINR target. Each target is tested with the fixed-point oracle; a step
/// where that oracle stays undecided is settled by the linear certificate,
/// and UndecidedFeasibility is thrown only if both fail to decide.
inline MaxMinSolution solve_maxmin_bisection(const SinrCoefficients& co, const SolverTolerances& tol = {})
{
    const Eigen::Index K = co.A.size();
    require(K >= 1, "empty problem");
    require((co.A.array() > 0).all() && (co.C.array() > 0).all(), "A and C must be positive");

    MaxMinSolution sol;
    double lo = 0.0;
    double hi = sinr_upper_bound(co);
    Eigen::VectorXd q_lo = Eigen::VectorXd::Zero(K);
    while ((hi - lo) / hi >= tol.bisection_rel) {
        const double mid = 0.5 * (lo + hi);
        auto res = feasibility_fixed_point(mid, co, tol);
        BisectionStep step{mid, res.status, res.iterations, false};
        if (res.status == Feasibility::undecided) {
            res = feasibility_linear_certificate(mid, co, tol);
            step.status = res.status;
            step.certified = true;
        }
        sol.trace.push_back(step);
        ++sol.bisection_iterations;
        if (res.status == Feasibility::undecided)
            throw UndecidedFeasibility("feasibility undecided at t = " + std::to_string(mid), sol.trace);
        if (res.status == Feasibility::feasible) {
            lo = mid;
            q_lo = std::move(res.q);
        } else {
            hi = mid;
        }
    }
    sol.t_star = lo;
    sol.t_upper = hi;
    sol.rate_star = std::log2(1.0 + lo);
    sol.q_min_power = q_lo;
    // Scaling all powers up raises every SINR, so the scaled point stays feasible.
    const double peak = q_lo.maxCoeff();
    sol.q_star = peak > 0.0 ? Eigen::VectorXd((q_lo / peak).cwiseMin(1.0)) : q_lo;
    return sol;
}

inline MaxMinSolution solve_maxmin_bisection(const RateContext& ctx, const SolverTolerances& tol = {})
{
    return solve_maxmin_bisection(sinr_coefficients(ctx), tol);
}

inline Eigen::VectorXd max_power_allocation(int num_users)
{
    require(num_users >= 1, "need at least one user");
    return Eigen::VectorXd::Ones(num_users);
}

/// Exhaustive search over a uniform grid on [0,1]^K (K <= 3). Rates go
/// through user_rate directly, not the coefficient form, so this stays an
/// independent check on the bisection solver.
inline Eigen::VectorXd brute_force_maxmin(const RateContext& ctx, int grid_resolution)
{
    const int K = ctx.num_users();
    require(K <= 3, "brute force search supports at most 3 users");
    require(grid_resolution >= 100, "grid_resolution must be >= 100");

    Eigen::VectorXd q(K);
    Eigen::VectorXd best = Eigen::VectorXd::Zero(K);
    double best_rate = -1.0;
    std::vector<int> idx(static_cast<std::size_t>(K), 0);
    const double step = 1.0 / (grid_resolution - 1);
    while (true) {
        for (int k = 0; k < K; ++k)
            q(k) = idx[static_cast<std::size_t>(k)] * step;
        const double r = min_rate(ctx, q);
        if (r > best_rate) {
            best_rate = r;
            best = q;
        }
        int k = 0;
        while (k < K && ++idx[static_cast<std::size_t>(k)] == grid_resolution)
            idx[static_cast<std::size_t>(k++)] = 0;
        if (k == K)
            break;
    }
    return best;
}

} // namespace cfmm
