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

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "cfmm/checkpoint.hpp"
#include "cfmm/config_io.hpp"
#include "cfmm/dataset.hpp"
#include "cfmm/dnn.hpp"
#include "cfmm/rate_model.hpp"
#include "cfmm/report.hpp"
#include "cfmm/solver.hpp"

namespace cfmm {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; the first exception is rethrown after all workers
/// have joined.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn)
{
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::jthread> pool;
    const std::size_t used = std::min(workers, n);
    for (std::size_t w = 0; w < used; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += used)
                    fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error)
                    error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (error)
        std::rethrow_exception(error);
}

inline int default_threads()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

inline std::uint64_t dataset_digest(const Dataset& ds)
{
    return fnv1a(serialize(ds));
}

struct EvalOptions {
    int threads = 1;
    const Mlp* model = nullptr; // required for dnn and dnn-online
    FinetuneConfig finetune;
    SolverTolerances solver;
};

/// Power allocation for one realization by the selected method.
inline Eigen::VectorXd allocate(Method method, const Eigen::MatrixXd& beta, const SystemConfig& cfg,
                                const EvalOptions& opt)
{
    switch (method) {
    case Method::baseline:
        return solve_maxmin_bisection(make_rate_context(beta, cfg), opt.solver).q_star;
    case Method::max_power:
        return max_power_allocation(static_cast<int>(beta.cols()));
    case Method::dnn:
        return forward(*opt.model, beta);
    case Method::dnn_online:
        return online_finetune(*opt.model, beta, cfg, opt.finetune).q;
    }
    throw ValidationError("unknown method");
}

inline void check_compatible(Method method, const Dataset& ds, const SystemConfig& cfg, const EvalOptions& opt)
{
    require(ds.size() >= 1, "dataset is empty");
    if (ds.header.num_aps != static_cast<std::uint32_t>(cfg.num_aps)
        || ds.header.num_users != static_cast<std::uint32_t>(cfg.num_users))
        throw ValidationError("dataset dimensions (M=" + std::to_string(ds.header.num_aps)
                              + ", K=" + std::to_string(ds.header.num_users) + ") differ from config");
    if (method == Method::dnn || method == Method::dnn_online) {
        if (!opt.model)
            throw ValidationError(std::string(to_string(method)) + " needs a model checkpoint");
        if (opt.model->num_aps != cfg.num_aps || opt.model->num_users != cfg.num_users)
            throw ValidationError("model dimensions differ from dataset");
    }
}

/// Allocations for every sample, rates through the rate model, net
/// throughput, and summary statistics.
inline RunReport evaluate(Method method, const Dataset& ds, const SystemConfig& cfg, const EvalOptions& opt = {})
{
    cfg.validate();
    check_compatible(method, ds, cfg, opt);

    RunReport rep;
    rep.method = method;
    rep.num_aps = cfg.num_aps;
    rep.num_users = cfg.num_users;
    rep.config_digest = config_digest(cfg);
    rep.dataset_digest = dataset_digest(ds);
    rep.dataset_seed = ds.header.seed;
    rep.dataset_split = to_string(ds.header.split);
    if (opt.model)
        rep.input_transform = to_string(opt.model->normalizer.transform);
    rep.provenance["system"] = to_json(cfg);
    if (method == Method::dnn_online)
        rep.provenance["finetune"] = to_json(opt.finetune);

    rep.records.resize(ds.size());
    parallel_for(ds.size(), opt.threads, [&](std::size_t i) {
        const auto& beta = ds.betas[i];
        const auto t0 = std::chrono::steady_clock::now();
        Eigen::VectorXd q = allocate(method, beta, cfg, opt);
        const auto t1 = std::chrono::steady_clock::now();

        SampleRecord r;
        r.index = static_cast<std::size_t>(ds.header.first_index) + i;
        r.rates = user_rate(make_rate_context(beta, cfg), q);
        r.q = std::move(q);
        r.min_rate = min_rate_of(r.rates).value;
        r.net = r.rates.unaryExpr([&](double v) { return net_throughput(v, cfg); });
        r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        rep.records[i] = std::move(r);
    });
    rep.summary = summarize(rep.records);
    return rep;
}

struct AuditResult {
    std::size_t samples = 0;
    double max_rate_error = 0.0; // absolute, bits/s/Hz
    double max_net_error = 0.0;  // relative
};

/// Recomputes every stored rate from the dataset and the stored allocation.
inline AuditResult audit_report(const RunReport& rep, const Dataset& ds, const SystemConfig& cfg)
{
    require(rep.records.size() == ds.size(), "report and dataset sample counts differ");
    AuditResult a;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& r = rep.records[i];
        const Eigen::VectorXd rates = user_rate(make_rate_context(ds.betas[i], cfg), r.q);
        a.max_rate_error = std::max(a.max_rate_error, (rates - r.rates).cwiseAbs().maxCoeff());
        a.max_rate_error = std::max(a.max_rate_error, std::abs(min_rate_of(rates).value - r.min_rate));
        for (Eigen::Index k = 0; k < rates.size(); ++k) {
            const double net = net_throughput(rates(k), cfg);
            a.max_net_error = std::max(a.max_net_error, std::abs(net - r.net(k)) / std::max(1.0, std::abs(net)));
        }
        ++a.samples;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Timing

struct TimingRow {
    Method method = Method::baseline;
    std::size_t samples = 0;
    double total_seconds = 0.0;
    double speedup_vs_baseline = 0.0; // baseline total / this total
};

/// Single-threaded wall clock over the first n samples, per method. Each
/// method first runs once untimed to warm caches.
inline std::vector<TimingRow> bench_timing(const std::vector<Method>& methods, const Dataset& ds,
                                           const SystemConfig& cfg, std::size_t n, EvalOptions opt)
{
    opt.threads = 1;
    n = std::min(n, ds.size());
    require(n >= 1, "nothing to benchmark");
    for (Method m : methods)
        check_compatible(m, ds, cfg, opt);

    std::vector<TimingRow> rows;
    double baseline_total = 0.0;
    double sink = 0.0;
    for (Method m : methods) {
        sink += allocate(m, ds.betas[0], cfg, opt).sum();
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < n; ++i)
            sink += allocate(m, ds.betas[i], cfg, opt).sum();
        const auto t1 = std::chrono::steady_clock::now();
        TimingRow row{m, n, std::chrono::duration<double>(t1 - t0).count(), 0.0};
        if (m == Method::baseline)
            baseline_total = row.total_seconds;
        rows.push_back(row);
    }
    if (baseline_total > 0.0)
        for (auto& r : rows)
            r.speedup_vs_baseline = baseline_total / r.total_seconds;
    // Keeps the timed work observable.
    if (sink == -1.0)
        rows.clear();
    return rows;
}

// ---------------------------------------------------------------------------
// Training on dataset files

inline Checkpoint train_checkpoint(const Dataset& train_ds, const Dataset& val_ds, const SystemConfig& cfg,
                                   const TrainConfig& tc)
{
    require(train_ds.header.num_aps == static_cast<std::uint32_t>(cfg.num_aps)
                && train_ds.header.num_users == static_cast<std::uint32_t>(cfg.num_users),
            "training dataset dimensions differ from config");
    require(val_ds.header.num_aps == train_ds.header.num_aps && val_ds.header.num_users == train_ds.header.num_users,
            "validation dataset dimensions differ from training set");
    TrainResult res = train(train_ds.betas, val_ds.betas, cfg, tc);
    return {std::move(res.model), std::move(res.history), res.best_iteration, config_digest(cfg)};
}

} // namespace cfmm
