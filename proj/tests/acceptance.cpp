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

// Acceptance run: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Everything is generated from fixed seeds.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cfmm/cfmm.hpp"

using namespace cfmm;

namespace {

constexpr std::uint64_t kSeed = 7;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void log(const std::string& s)
{
    std::fprintf(stderr, "  .. %s\n", s.c_str());
}

// Shared between criteria so each expensive artifact is built once.
struct Workspace {
    SystemConfig cfg30 = reference_config(30, 5);
    SystemConfig cfg50 = reference_config(50, 10);
    std::optional<Dataset> test30;
    std::optional<Dataset> test50;
    std::optional<RunReport> base30;
    std::optional<RunReport> base50;
    std::optional<Checkpoint> model30;
    std::optional<RunReport> dnn30;

    const Dataset& test_set30()
    {
        if (!test30)
            test30 = generate_random_split(cfg30, kSeed, Split::test, 1000);
        return *test30;
    }
    const Dataset& test_set50()
    {
        if (!test50)
            test50 = generate_random_split(cfg50, kSeed, Split::test, 1000);
        return *test50;
    }
    const RunReport& baseline30()
    {
        if (!base30)
            base30 = evaluate(Method::baseline, test_set30(), cfg30);
        return *base30;
    }
    const RunReport& baseline50()
    {
        if (!base50)
            base50 = evaluate(Method::baseline, test_set50(), cfg50);
        return *base50;
    }
    const Checkpoint& trained30()
    {
        if (!model30) {
            const auto t0 = Clock::now();
            const Dataset tr = generate_random_split(cfg30, kSeed, Split::train, 100000);
            const Dataset va = generate_random_split(cfg30, kSeed, Split::validation, 1000);
            model30 = train_checkpoint(tr, va, cfg30, TrainConfig{});
            log(fmt("M=30 K=5 training (100000 samples, 10000 iterations) took %.1f s, best iteration %lld",
                    seconds_since(t0), static_cast<long long>(model30->best_iteration)));
        }
        return *model30;
    }
    const RunReport& dnn_report30()
    {
        if (!dnn30) {
            EvalOptions opt;
            opt.model = &trained30().model;
            dnn30 = evaluate(Method::dnn, test_set30(), cfg30, opt);
        }
        return *dnn30;
    }
};

Outcome baseline_optimality(Workspace& ws)
{
    const double a30 = ws.baseline30().summary.avg_min_rate;
    const double a50 = ws.baseline50().summary.avg_min_rate;
    const bool ok = std::abs(a30 - 1.02) <= 0.05 && std::abs(a50 - 0.99) <= 0.05;
    return {ok, fmt("avg min-rate M30K5 %.4f (1.02 +- 0.05), M50K10 %.4f (0.99 +- 0.05)", a30, a50)};
}

Outcome oracle_equivalence(Workspace&)
{
    double worst_below = 0.0;
    double worst_above = -1e300;
    bool ok = true;
    for (int i = 0; i < 50; ++i) {
        const int M = 2 + i % 2;
        const SystemConfig cfg = reference_config(M, 2);
        const auto beta = generate_realization(cfg, 10000 + i, Placement::uniform_random).beta;
        const auto ctx = make_rate_context(beta, cfg);
        const auto sol = solve_maxmin_bisection(ctx);
        const double bis = min_rate(ctx, sol.q_star);
        const double grid = min_rate(ctx, brute_force_maxmin(ctx, 200));
        // the grid optimum may not exceed the certified upper end of the bisection bracket
        const double above = grid - std::log2(1.0 + sol.t_upper);
        worst_below = std::max(worst_below, grid - bis);
        worst_above = std::max(worst_above, above);
        ok = ok && bis >= grid - 2e-3 && above <= 0.0;
    }
    return {ok, fmt("50 instances: max(grid - bisection) %.2e (<= 2e-3), max(grid - bracket top) %.2e (<= 0)",
                    worst_below, worst_above)};
}

Outcome dnn_training(Workspace& ws)
{
    const double dnn = ws.dnn_report30().summary.avg_min_rate;
    const double base = ws.baseline30().summary.avg_min_rate;
    const bool ok = dnn >= 0.80 && dnn >= 0.80 * base;
    return {ok, fmt("dnn avg min-rate %.4f (>= 0.80), %.1f%% of baseline %.4f (>= 80%%)", dnn, 100 * dnn / base,
                    base)};
}

Outcome online_finetuning(Workspace& ws)
{
    EvalOptions opt;
    opt.model = &ws.trained30().model;
    const auto t0 = Clock::now();
    const RunReport online = evaluate(Method::dnn_online, ws.test_set30(), ws.cfg30, opt);
    log(fmt("dnn-online on 1000 M=30 K=5 samples took %.1f s", seconds_since(t0)));
    const RunReport& dnn = ws.dnn_report30();
    std::size_t worse = 0;
    for (std::size_t i = 0; i < online.records.size(); ++i)
        worse += online.records[i].min_rate < dnn.records[i].min_rate ? 1 : 0;
    const double avg = online.summary.avg_min_rate;
    const double base = ws.baseline30().summary.avg_min_rate;
    const bool ok = avg >= 0.93 * base && worse == 0;
    return {ok, fmt("dnn-online avg %.4f = %.1f%% of baseline %.4f (>= 93%%); samples below plain dnn: %zu", avg,
                    100 * avg / base, base, worse)};
}

Outcome mobility(Workspace& ws)
{
    SystemConfig cfg = ws.cfg30;
    std::tie(cfg.grid_rows, cfg.grid_cols) = nearest_square_grid(cfg.num_aps);
    const auto splits = generate_datasets(cfg, kSeed, DatasetMode::grid_mobile, {10000, 1000, 1000});
    const bool sizes = splits.train.size() == 10000 && splits.validation.size() == 1000 && splits.test.size() == 1000;
    const auto t0 = Clock::now();
    const Checkpoint ck = train_checkpoint(splits.train, splits.validation, cfg, TrainConfig{});
    const double train_s = seconds_since(t0);
    EvalOptions opt;
    opt.model = &ck.model;
    const double online = evaluate(Method::dnn_online, splits.test, cfg, opt).summary.avg_min_rate;
    const double base = evaluate(Method::baseline, splits.test, cfg).summary.avg_min_rate;
    const bool ok = sizes && train_s < 600.0 && online >= 0.93 * base;
    return {ok, fmt("splits %zu/%zu/%zu, offline training %.1f s (< 600 s), dnn-online %.4f = %.1f%% of baseline "
                    "%.4f (>= 93%%)",
                    splits.train.size(), splits.validation.size(), splits.test.size(), train_s, online,
                    100 * online / base, base)};
}

Outcome timing(Workspace& ws)
{
    const std::vector<Method> methods{Method::baseline, Method::dnn, Method::dnn_online};
    const auto ratios = [&](const Dataset& ds, const SystemConfig& cfg, const Mlp& model) {
        EvalOptions opt;
        opt.model = &model;
        const auto rows = bench_timing(methods, ds, cfg, 100, opt);
        return std::pair{rows[1].speedup_vs_baseline, rows[2].speedup_vs_baseline};
    };
    const auto [dnn30, online30] = ratios(ws.test_set30(), ws.cfg30, ws.trained30().model);
    // Inference cost does not depend on the weights, so an untrained M=50 K=10 network times the same.
    Mlp m50 = build_model(50, 10, kSeed);
    m50.normalizer = Normalizer::fit(raw_features(ws.test_set50().betas, TrainConfig{}.input_transform),
                                     TrainConfig{}.input_transform);
    const auto [dnn50, online50] = ratios(ws.test_set50(), ws.cfg50, m50);
    const bool ok = dnn30 >= 10 && dnn50 >= 10 && online30 >= 2 && online50 >= 2 && dnn50 > dnn30
                    && online50 > online30;
    return {ok, fmt("speedup vs baseline over 100 samples: dnn %.1fx / %.1fx (>= 10x), dnn-online %.3fx / %.3fx "
                    "(>= 2x), M30K5 / M50K10, growing with size required",
                    dnn30, dnn50, online30, online50)};
}

Outcome gradient_check(Workspace& ws)
{
    const SystemConfig& cfg = ws.cfg30;
    Mlp model = build_model(30, 5, 99);
    std::vector<Eigen::MatrixXd> fit_set;
    for (int i = 0; i < 200; ++i)
        fit_set.push_back(generate_realization(cfg, 50000 + i, Placement::uniform_random).beta);
    model.normalizer = Normalizer::fit(raw_features(fit_set, TrainConfig{}.input_transform), TrainConfig{}.input_transform);

    Rng rng(kSeed);
    int probed = 0;
    int instances = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 60000; instances < 10; ++seed) {
        std::vector<Eigen::MatrixXd> batch;
        for (int i = 0; i < 4; ++i)
            batch.push_back(generate_realization(cfg, seed * 8 + i, Placement::uniform_random).beta);
        const ProblemSet set = make_problem_set(model.normalizer, batch, cfg);
        std::vector<std::size_t> idx{0, 1, 2, 3};
        // skip instances where the two weakest users are (nearly) tied
        const Eigen::MatrixXd q = forward_features(model, set.features);
        bool tie = false;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Eigen::VectorXd r = set.coeffs[i].rates(q.col(static_cast<Eigen::Index>(i)));
            std::sort(r.data(), r.data() + r.size());
            tie = tie || r(1) - r(0) < 1e-4;
        }
        if (tie)
            continue;
        ++instances;
        const auto lg = gradients(model, set, idx);
        const auto g = lg.grads.blocks();
        auto theta = parameter_blocks(model);
        int here = 0;
        for (int attempt = 0; here < 25 && attempt < 500; ++attempt) {
            const std::size_t b = std::uniform_int_distribution<std::size_t>(0, theta.size() - 1)(rng);
            const std::size_t i = std::uniform_int_distribution<std::size_t>(0, theta[b].size() - 1)(rng);
            const double an = g[b][i];
            if (std::abs(an) < 1e-6)
                continue; // below the resolution of a 1e-6 central difference
            const double saved = theta[b][i];
            const double h = 1e-6;
            theta[b][i] = saved + h;
            const double up = batch_loss(model, set, idx);
            theta[b][i] = saved - h;
            const double down = batch_loss(model, set, idx);
            theta[b][i] = saved;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)));
            ++here;
        }
        probed += here;
    }
    const bool ok = probed >= 200 && worst < 1e-5;
    return {ok, fmt("%d coordinates over %d instances, max relative error %.2e (< 1e-5)", probed, instances, worst)};
}

Outcome property_suite(Workspace& ws)
{
    std::vector<std::string> failed;
    const auto check = [&](bool cond, const char* what) {
        if (!cond)
            failed.emplace_back(what);
    };
    const SystemConfig& cfg = ws.cfg30;
    Rng rng(kSeed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto random_q = [&](int K) {
        Eigen::VectorXd q(K);
        for (int k = 0; k < K; ++k)
            q(k) = u(rng);
        return q;
    };

    bool sinr_mono = true;
    bool fp_mono = true;
    bool boundary = true;
    bool dominance = true;
    for (int s = 0; s < 20; ++s) {
        const auto ctx = make_rate_context(ws.test_set30().betas[static_cast<std::size_t>(s)], cfg);
        const auto co = sinr_coefficients(ctx);
        // SINR rises with own power and falls with everyone else's
        const Eigen::VectorXd q = random_q(5) * 0.9;
        const Eigen::VectorXd base = sinr_breakdown(ctx, q).sinr();
        for (int j = 0; j < 5; ++j) {
            Eigen::VectorXd up = q;
            up(j) += 0.05;
            const Eigen::VectorXd s2 = sinr_breakdown(ctx, up).sinr();
            for (int k = 0; k < 5; ++k)
                sinr_mono = sinr_mono && (k == j ? s2(k) > base(k) : s2(k) < base(k));
        }
        // fixed-point iterates are non-decreasing and stay in the box
        const auto sol = solve_maxmin_bisection(co);
        Eigen::VectorXd prev = Eigen::VectorXd::Zero(5);
        const auto res = feasibility_fixed_point(0.5 * sol.t_star, co, SolverTolerances{}, [&](const Eigen::VectorXd& x) {
            fp_mono = fp_mono && (x.array() >= prev.array()).all() && (x.array() <= 1.0).all();
            prev = x;
        });
        fp_mono = fp_mono && res.status == Feasibility::feasible;
        // bracket ends: lower feasible, upper not
        boundary = boundary && (co.sinr(sol.q_star).array() >= sol.t_star * (1 - 1e-9)).all()
                   && feasibility_linear_certificate(sol.t_upper, co).status != Feasibility::feasible
                   && (sol.t_upper - sol.t_star) / sol.t_upper < 1e-4;
        // no random allocation beats the solver beyond the bracket width
        const double best = min_rate(ctx, sol.q_star);
        const double slack = std::log2(1 + sol.t_upper) - std::log2(1 + sol.t_star);
        for (int i = 0; i < 1000; ++i)
            dominance = dominance && min_rate(ctx, random_q(5)) <= best + slack + 1e-12;
    }
    check(sinr_mono, "sinr-monotonicity");
    check(fp_mono, "fixed-point-monotone");
    check(boundary, "bisection-boundary");
    check(dominance, "max-min-dominance");

    {
        bool in_range = true;
        const Mlp m = build_model(30, 5, 3);
        for (std::size_t i = 0; i < 100; ++i) {
            const auto q = forward(m, ws.test_set30().betas[i]);
            in_range = in_range && (q.array() > 0).all() && (q.array() < 1).all();
        }
        check(in_range, "sigmoid-output-range");
    }
    {
        const auto ctx = make_rate_context(Eigen::MatrixXd::Constant(30, 5, 1e-9), cfg);
        const auto sol = solve_maxmin_bisection(ctx);
        const auto r = user_rate(ctx, sol.q_star);
        check(sol.q_star.isApprox(Eigen::VectorXd::Ones(5), 1e-12) && (r.array() - r(0)).abs().maxCoeff() < 1e-12,
              "symmetric-network");
    }
    {
        const Dataset small = generate_random_split(cfg, kSeed, Split::test, 20);
        const std::string bytes = serialize(small);
        check(serialize(deserialize_dataset(bytes)) == bytes, "dataset-round-trip");
        Checkpoint ck{build_model(30, 5, 1), {{0, 0.0, -0.5}}, 0, config_digest(cfg)};
        const std::string cb = serialize(ck);
        check(serialize(deserialize_checkpoint(cb)) == cb, "checkpoint-round-trip");
    }
    {
        const auto pipeline = [&] {
            SystemConfig c = reference_config(10, 3);
            const auto splits = generate_datasets(c, 11, DatasetMode::random_static, {300, 50, 40});
            TrainConfig tc;
            tc.iterations = 100;
            tc.batch_size = 20;
            const Checkpoint ck = train_checkpoint(splits.train, splits.validation, c, tc);
            EvalOptions opt;
            opt.model = &ck.model;
            opt.finetune.iterations = 10;
            return std::tuple{serialize(splits.test), serialize(ck),
                              evaluate(Method::dnn_online, splits.test, c, opt).summary.avg_min_rate,
                              evaluate(Method::baseline, splits.test, c).summary.avg_min_rate};
        };
        check(pipeline() == pipeline(), "pipeline-determinism");
    }
    std::string detail = "sinr monotonicity, fixed-point monotonicity, bisection boundary, dominance over 1000 "
                         "random allocations x 20 instances, sigmoid range, symmetric q*=1, round trips, determinism";
    if (!failed.empty()) {
        detail = "failed:";
        for (const auto& f : failed)
            detail += " " + f;
    }
    return {failed.empty(), detail};
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome(Workspace&)> run;
    };
    const std::vector<Criterion> criteria{
        {"baseline-optimality", baseline_optimality}, {"oracle-equivalence", oracle_equivalence},
        {"dnn-training", dnn_training},               {"online-finetuning", online_finetuning},
        {"mobility", mobility},                       {"timing-ratios", timing},
        {"gradient-check", gradient_check},           {"property-suite", property_suite},
    };

    Workspace ws;
    int failures = 0;
    std::vector<std::string> lines;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run(ws);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const std::string line = fmt("[%s] %-20s %s (%.1f s)", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                                     seconds_since(t0));
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        lines.push_back(line);
        failures += o.pass ? 0 : 1;
    }
    std::printf("\n%zu criteria, %d failed\n", criteria.size(), failures);
    return failures == 0 ? 0 : 1;
}
