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

// cfmm: command-line front end for dataset generation, training,
// evaluation and benchmarking of uplink max-min power control.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>

#include "CLI11.hpp"

#include "cfmm/cfmm.hpp"

namespace fs = std::filesystem;
using namespace cfmm;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    int threads = default_threads();
    bool force = false;
};

RunConfig load_config(const Globals& g)
{
    RunConfig rc = g.config_path.empty() ? run_config_from_json(Json::object()) : load_run_config(g.config_path);
    if (g.seed)
        rc.train.seed = *g.seed;
    return rc;
}

// Baseline solves on very large datasets are the costliest step; they run on
// a leading subset unless explicitly requested.
constexpr std::size_t large_dataset = 10000;

Dataset maybe_subset(Dataset ds, Method method, std::size_t limit, bool full)
{
    if (limit > 0 && limit < ds.size())
        return slice(ds, 0, limit, ds.header.split);
    if (method == Method::baseline && ds.size() > large_dataset && !full) {
        std::cerr << "warning: baseline on " << ds.size() << " samples is expensive; using the first 1000 "
                  << "(pass --full to solve all, or --limit N)\n";
        return slice(ds, 0, 1000, ds.header.split);
    }
    if (method == Method::baseline && ds.size() > large_dataset)
        std::cerr << "warning: solving " << ds.size() << " max-min problems, this may take a while\n";
    return ds;
}

void print_summary(const RunReport& rep)
{
    std::printf("%-10s samples=%zu avg_min_rate=%.4f bit/s/Hz p5_net=%.3f Mbit/s wall=%.3fs\n",
                to_string(rep.method), rep.summary.samples, rep.summary.avg_min_rate,
                rep.summary.p5_net_throughput / 1e6, rep.summary.total_wall_seconds);
}

int run_eval(const Globals& g, Method method, const std::string& data, const std::string& checkpoint,
             std::size_t limit, bool full, const std::optional<FinetuneConfig>& ft_override)
{
    const RunConfig rc = load_config(g);
    Dataset ds = maybe_subset(load_dataset(data), method, limit, full);

    EvalOptions opt;
    opt.threads = g.threads;
    opt.finetune = ft_override.value_or(rc.finetune);
    std::optional<Checkpoint> ck;
    if (method == Method::dnn || method == Method::dnn_online) {
        if (checkpoint.empty())
            throw ValidationError(std::string(to_string(method)) + " needs --checkpoint");
        ck = load_checkpoint(checkpoint);
        opt.model = &ck->model;
    }
    RunReport rep = evaluate(method, ds, rc.system, opt);
    rep.provenance["dataset_file"] = data;
    if (ck)
        rep.provenance["checkpoint_file"] = checkpoint;
    const std::string stem = std::string(to_string(method)) + "_" + to_string(ds.header.split);
    const auto paths = report_paths(g.out, stem);
    save_report(rep, paths, g.force);
    print_summary(rep);
    std::printf("wrote %s and %s\n", paths.samples_csv.c_str(), paths.summary_json.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cell-free massive MIMO uplink max-min power control"};
    app.fallthrough();
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Master seed (datasets and training)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads for per-sample evaluation")->check(CLI::PositiveNumber);
    app.add_flag("--force", g.force, "Overwrite existing output files");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate train/val/test datasets");
    std::string mode = "random_static";
    SplitCounts counts;
    gen->add_option("--mode", mode, "random_static or grid_mobile")
        ->check(CLI::IsMember({"random_static", "grid_mobile"}));
    gen->add_option("--train", counts.train, "Training samples");
    gen->add_option("--val", counts.validation, "Validation samples");
    gen->add_option("--test", counts.test, "Test samples");

    // train
    auto* tr = app.add_subcommand("train", "Train the power-control network offline");
    std::string train_data, val_data;
    std::optional<int> iterations;
    tr->add_option("--train-data", train_data, "Training dataset")->required()->check(CLI::ExistingFile);
    tr->add_option("--val-data", val_data, "Validation dataset")->required()->check(CLI::ExistingFile);
    tr->add_option("--iterations", iterations, "Override training iterations");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a method on a dataset");
    std::string method_name, data, checkpoint;
    std::size_t limit = 0;
    bool full = false;
    ev->add_option("--method", method_name, "baseline, max-power, dnn or dnn-online")->required();
    ev->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
    ev->add_option("--checkpoint", checkpoint, "Model checkpoint (dnn methods)");
    ev->add_option("--limit", limit, "Evaluate only the first N samples");
    ev->add_flag("--full", full, "Allow baseline solves on very large datasets");

    // finetune
    auto* ft = app.add_subcommand("finetune", "Per-sample online fine-tuning on a dataset");
    std::optional<int> ft_iters;
    std::optional<double> ft_lr;
    ft->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
    ft->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    ft->add_option("--iterations", ft_iters, "Fine-tuning steps per sample");
    ft->add_option("--lr", ft_lr, "Fine-tuning learning rate");
    ft->add_option("--limit", limit, "Evaluate only the first N samples");

    // solve-baseline
    auto* sb = app.add_subcommand("solve-baseline", "Exact max-min solve for every sample");
    sb->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
    sb->add_option("--limit", limit, "Solve only the first N samples");
    sb->add_flag("--full", full, "Allow solving very large datasets");

    // bench
    auto* be = app.add_subcommand("bench", "Single-threaded timing of all methods");
    std::size_t bench_samples = 100;
    be->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
    be->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    be->add_option("--samples", bench_samples, "Realizations to time");

    // report
    auto* rp = app.add_subcommand("report", "Recompute and check a report summary");
    std::string report_stem;
    rp->add_option("--report", report_stem, "Report path stem, e.g. out/dnn_test")->required();

    // audit
    auto* au = app.add_subcommand("audit", "Recompute every stored rate through the rate model");
    au->add_option("--report", report_stem, "Report path stem, e.g. out/dnn_test")->required();
    au->add_option("--data", data, "Dataset the report was produced from")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::validation);
    }

    try {
        if (*gen) {
            RunConfig rc = load_config(g);
            const std::uint64_t seed = g.seed.value_or(1);
            const auto m = mode == "grid_mobile" ? DatasetMode::grid_mobile : DatasetMode::random_static;
            if (m == DatasetMode::grid_mobile && gen->count("--train") == 0)
                counts.train = 10000;
            if (m == DatasetMode::grid_mobile && rc.system.grid_rows == 0 && rc.system.grid_cols == 0) {
                std::tie(rc.system.grid_rows, rc.system.grid_cols) = nearest_square_grid(rc.system.num_aps);
                std::fprintf(stderr, "note: AP grid not configured, using %d x %d\n", rc.system.grid_rows,
                             rc.system.grid_cols);
            }
            const auto splits = generate_datasets(rc.system, seed, m, counts);
            save_datasets(splits, g.out, g.force);
            std::printf("wrote %zu/%zu/%zu samples (M=%d, K=%d, %s, seed %llu) to %s\n", splits.train.size(),
                        splits.validation.size(), splits.test.size(), rc.system.num_aps, rc.system.num_users,
                        to_string(m), static_cast<unsigned long long>(seed), g.out.c_str());
        } else if (*tr) {
            RunConfig rc = load_config(g);
            if (iterations)
                rc.train.iterations = *iterations;
            const Dataset trd = load_dataset(train_data);
            const Dataset vad = load_dataset(val_data);
            const auto t0 = std::chrono::steady_clock::now();
            const Checkpoint ck = train_checkpoint(trd, vad, rc.system, rc.train);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const fs::path path = fs::path(g.out) / "model.ckpt";
            save_checkpoint(ck, path, g.force);
            std::ostringstream hist;
            hist << "iteration,train_loss,validation_loss\n";
            for (const auto& h : ck.history)
                hist << h.iteration << ',' << format_double(h.train_loss) << ','
                     << format_double(h.validation_loss) << '\n';
            write_file(fs::path(g.out) / "train_history.csv", hist.str(), g.force);
            std::printf("trained %d iterations in %.1fs\n", rc.train.iterations, secs);
            double best = 0.0;
            for (const auto& h : ck.history)
                if (h.iteration == ck.best_iteration)
                    best = -h.validation_loss;
            std::printf("best validation avg min-rate %.4f bit/s/Hz at iteration %lld (input %s); wrote %s\n", best,
                        static_cast<long long>(ck.best_iteration), to_string(ck.model.normalizer.transform),
                        path.c_str());
        } else if (*ev) {
            return run_eval(g, parse_method(method_name), data, checkpoint, limit, full, std::nullopt);
        } else if (*ft) {
            std::optional<FinetuneConfig> override;
            if (ft_iters || ft_lr) {
                FinetuneConfig f = load_config(g).finetune;
                if (ft_iters)
                    f.iterations = *ft_iters;
                if (ft_lr)
                    f.learning_rate = *ft_lr;
                override = f;
            }
            return run_eval(g, Method::dnn_online, data, checkpoint, limit, false, override);
        } else if (*sb) {
            return run_eval(g, Method::baseline, data, "", limit, full, std::nullopt);
        } else if (*be) {
            const RunConfig rc = load_config(g);
            const Dataset ds = load_dataset(data);
            const Checkpoint ck = load_checkpoint(checkpoint);
            EvalOptions opt;
            opt.model = &ck.model;
            opt.finetune = rc.finetune;
            const auto rows = bench_timing({Method::baseline, Method::dnn, Method::dnn_online, Method::max_power}, ds,
                                           rc.system, bench_samples, opt);
            Json out = Json::array();
            std::printf("%-12s %8s %12s %10s\n", "method", "samples", "total_s", "speedup");
            for (const auto& r : rows) {
                std::printf("%-12s %8zu %12.6f %10.2f\n", to_string(r.method), r.samples, r.total_seconds,
                            r.speedup_vs_baseline);
                out.push_back({{"method", to_string(r.method)},
                               {"samples", r.samples},
                               {"total_seconds", r.total_seconds},
                               {"speedup_vs_baseline", r.speedup_vs_baseline}});
            }
            write_file(fs::path(g.out) / "bench.json", out.dump(2) + "\n", g.force);
        } else if (*rp) {
            const RunReport rep = load_report(report_paths(fs::path(report_stem).parent_path(),
                                                           fs::path(report_stem).filename().string()));
            const ReportSummary again = summarize(rep.records);
            const double d = summary_discrepancy(again, rep.summary);
            print_summary(rep);
            std::printf("summary recomputed from %zu records: max relative discrepancy %.3g\n", rep.records.size(), d);
            if (!(d <= 1e-12)) {
                std::fprintf(stderr, "error: stored summary does not match per-sample records\n");
                return static_cast<int>(ExitCode::format);
            }
        } else if (*au) {
            const RunConfig rc = load_config(g);
            const RunReport rep = load_report(report_paths(fs::path(report_stem).parent_path(),
                                                           fs::path(report_stem).filename().string()));
            Dataset ds = load_dataset(data);
            if (rep.records.size() < ds.size())
                ds = slice(ds, 0, rep.records.size(), ds.header.split);
            if (dataset_digest(ds) != rep.dataset_digest)
                throw FormatError("dataset digest differs from the one recorded in the report");
            const AuditResult a = audit_report(rep, ds, rc.system);
            std::printf("audited %zu samples: max |rate error| %.3g bit/s/Hz, max net relative error %.3g\n",
                        a.samples, a.max_rate_error, a.max_net_error);
            if (a.max_rate_error > 1e-12 || a.max_net_error > 1e-12) {
                std::fprintf(stderr, "error: stored rates differ from recomputation\n");
                return static_cast<int>(ExitCode::runtime);
            }
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ExitCode::validation);
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return static_cast<int>(ExitCode::format);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return static_cast<int>(ExitCode::runtime);
    }
    return 0;
}
