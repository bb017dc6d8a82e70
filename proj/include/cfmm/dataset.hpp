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

// Dataset files (little-endian):
//
//   "CFMM"  magic
//   u32     version (1)
//   u32     M, u32 K
//   u64     sample count
//   u32     mode            0 random_static, 1 grid_mobile
//   u32     split           0 train, 1 validation, 2 test, 255 unsplit
//   u32     flags           bit 0: positions present
//   u64     seed
//   u64     config digest
//   u64     index of the first sample within its generation stream
//   per sample:
//     f64[M*K]   beta, row-major (m-major)
//     if positions: f64[2M] AP (x, y), then f64[2K] user (x, y)
//   u64     FNV-1a digest of all preceding bytes

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfmm/binary_io.hpp"
#include "cfmm/config.hpp"
#include "cfmm/config_io.hpp"
#include "cfmm/geometry.hpp"

namespace cfmm {

enum class DatasetMode : std::uint32_t { random_static = 0, grid_mobile = 1 };
enum class Split : std::uint32_t { train = 0, validation = 1, test = 2, unsplit = 255 };

inline const char* to_string(DatasetMode m)
{
    return m == DatasetMode::random_static ? "random_static" : "grid_mobile";
}

inline const char* to_string(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "val";
    case Split::test: return "test";
    case Split::unsplit: return "all";
    }
    return "?";
}

struct DatasetHeader {
    std::uint32_t num_aps = 0;
    std::uint32_t num_users = 0;
    DatasetMode mode = DatasetMode::random_static;
    Split split = Split::unsplit;
    bool has_positions = false;
    std::uint64_t seed = 0;
    std::uint64_t config_digest = 0;
    std::uint64_t first_index = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Eigen::MatrixXd> betas;
    std::vector<std::vector<Position>> ap_positions;   // empty unless has_positions
    std::vector<std::vector<Position>> user_positions; // empty unless has_positions

    std::size_t size() const { return betas.size(); }

    void validate() const
    {
        for (const auto& b : betas)
            require(b.rows() == header.num_aps && b.cols() == header.num_users, "sample shape differs from header");
        if (header.has_positions) {
            require(ap_positions.size() == betas.size() && user_positions.size() == betas.size(),
                    "position count differs from sample count");
            for (std::size_t i = 0; i < betas.size(); ++i)
                require(ap_positions[i].size() == header.num_aps && user_positions[i].size() == header.num_users,
                        "position list length differs from header");
        }
    }
};

inline constexpr std::array<char, 4> dataset_magic{'C', 'F', 'M', 'M'};
inline constexpr std::uint32_t dataset_version = 1;

inline std::string serialize(const Dataset& ds)
{
    ds.validate();
    const auto& h = ds.header;
    ByteWriter w;
    w.put_bytes({dataset_magic.data(), dataset_magic.size()});
    w.put(dataset_version);
    w.put(h.num_aps);
    w.put(h.num_users);
    w.put(static_cast<std::uint64_t>(ds.size()));
    w.put(static_cast<std::uint32_t>(h.mode));
    w.put(static_cast<std::uint32_t>(h.split));
    w.put(static_cast<std::uint32_t>(h.has_positions ? 1u : 0u));
    w.put(h.seed);
    w.put(h.config_digest);
    w.put(h.first_index);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& b = ds.betas[i];
        for (Eigen::Index m = 0; m < b.rows(); ++m)
            for (Eigen::Index k = 0; k < b.cols(); ++k)
                w.put(b(m, k));
        if (h.has_positions) {
            for (const auto& p : ds.ap_positions[i]) {
                w.put(p.x);
                w.put(p.y);
            }
            for (const auto& p : ds.user_positions[i]) {
                w.put(p.x);
                w.put(p.y);
            }
        }
    }
    w.seal();
    return w.bytes();
}

inline Dataset deserialize_dataset(std::string_view bytes, const std::string& name = "dataset")
{
    ByteReader r(bytes, name);
    if (r.get_bytes(4) != std::string_view(dataset_magic.data(), 4))
        throw FormatError(name + ": bad magic (not a dataset file)");
    if (const auto v = r.get<std::uint32_t>(); v != dataset_version)
        throw FormatError(name + ": unsupported version " + std::to_string(v));
    Dataset ds;
    auto& h = ds.header;
    h.num_aps = r.get<std::uint32_t>();
    h.num_users = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    const auto mode = r.get<std::uint32_t>();
    const auto split = r.get<std::uint32_t>();
    const auto flags = r.get<std::uint32_t>();
    if (mode > 1 || (split > 2 && split != 255) || flags > 1 || h.num_aps == 0 || h.num_users == 0)
        throw FormatError(name + ": corrupted header");
    h.mode = static_cast<DatasetMode>(mode);
    h.split = static_cast<Split>(split);
    h.has_positions = flags & 1u;
    h.seed = r.get<std::uint64_t>();
    h.config_digest = r.get<std::uint64_t>();
    h.first_index = r.get<std::uint64_t>();

    const std::size_t per_sample =
        (h.num_aps * h.num_users + (h.has_positions ? 2 * (h.num_aps + h.num_users) : 0)) * sizeof(double);
    if (count > r.remaining() / per_sample)
        throw FormatError(name + ": truncated file");

    const int M = static_cast<int>(h.num_aps);
    const int K = static_cast<int>(h.num_users);
    ds.betas.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Eigen::MatrixXd b(M, K);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k)
                b(m, k) = r.get<double>();
        ds.betas.push_back(std::move(b));
        if (h.has_positions) {
            std::vector<Position> aps(h.num_aps), users(h.num_users);
            for (auto& p : aps) {
                p.x = r.get<double>();
                p.y = r.get<double>();
            }
            for (auto& p : users) {
                p.x = r.get<double>();
                p.y = r.get<double>();
            }
            ds.ap_positions.push_back(std::move(aps));
            ds.user_positions.push_back(std::move(users));
        }
    }
    r.verify_seal();
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path, bool force)
{
    write_file(path, serialize(ds), force);
}

inline Dataset load_dataset(const std::filesystem::path& path)
{
    return deserialize_dataset(read_file(path), path.string());
}

struct SplitCounts {
    std::size_t train = 100000;
    std::size_t validation = 1000;
    std::size_t test = 1000;

    std::size_t total() const { return train + validation + test; }
};

// Stream ids for make_stream_rng. Random datasets use the split id.
inline constexpr std::uint64_t mobility_trajectory_stream = 100;
inline constexpr std::uint64_t mobility_shadowing_stream = 101;

/// Draws `count` independent realizations. Sample i of split s uses its own
/// generator stream (seed, s, first_index + i), so any subrange can be
/// regenerated on its own.
inline Dataset generate_random_split(const SystemConfig& cfg, std::uint64_t seed, Split split, std::size_t count,
                                     std::uint64_t first_index = 0)
{
    cfg.validate();
    Dataset ds;
    ds.header = {static_cast<std::uint32_t>(cfg.num_aps),
                 static_cast<std::uint32_t>(cfg.num_users),
                 DatasetMode::random_static,
                 split,
                 false,
                 seed,
                 config_digest(cfg),
                 first_index};
    ds.betas.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = make_stream_rng(seed, static_cast<std::uint64_t>(split), first_index + i);
        ds.betas.push_back(generate_realization(cfg, rng, Placement::uniform_random).beta);
    }
    return ds;
}

/// Grid APs, users moving for `total` one-second steps; shadowing redrawn
/// independently for every sample. Returned unsplit, in temporal order.
inline Dataset generate_mobility_trajectory(const SystemConfig& cfg, std::uint64_t seed, std::size_t total)
{
    cfg.validate();
    const auto aps = grid_ap_positions(cfg);
    Rng motion = make_stream_rng(seed, mobility_trajectory_stream, 0);
    MobilityState state = init_mobility(cfg, motion);

    Dataset ds;
    ds.header = {static_cast<std::uint32_t>(cfg.num_aps),
                 static_cast<std::uint32_t>(cfg.num_users),
                 DatasetMode::grid_mobile,
                 Split::unsplit,
                 true,
                 seed,
                 config_digest(cfg),
                 0};
    for (std::size_t t = 0; t < total; ++t) {
        if (t > 0)
            state = step_mobility(std::move(state), 1.0, cfg, motion);
        Rng shadow = make_stream_rng(seed, mobility_shadowing_stream, t);
        ds.betas.push_back(
            large_scale_fading(cfg, aps, state.user_positions, shadow_draws(cfg.num_aps, cfg.num_users, shadow)));
        ds.ap_positions.push_back(aps);
        ds.user_positions.push_back(state.user_positions);
    }
    return ds;
}

/// Contiguous slice [begin, begin + count) tagged with a split.
inline Dataset slice(const Dataset& ds, std::size_t begin, std::size_t count, Split split)
{
    require(begin + count <= ds.size(), "slice out of range");
    Dataset out;
    out.header = ds.header;
    out.header.split = split;
    out.header.first_index = ds.header.first_index + begin;
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(begin + count);
    out.betas.assign(ds.betas.begin() + b, ds.betas.begin() + e);
    if (ds.header.has_positions) {
        out.ap_positions.assign(ds.ap_positions.begin() + b, ds.ap_positions.begin() + e);
        out.user_positions.assign(ds.user_positions.begin() + b, ds.user_positions.begin() + e);
    }
    return out;
}

struct DatasetSplits {
    Dataset train;
    Dataset validation;
    Dataset test;
};

inline DatasetSplits generate_datasets(const SystemConfig& cfg, std::uint64_t seed, DatasetMode mode,
                                       const SplitCounts& counts)
{
    if (mode == DatasetMode::random_static)
        return {generate_random_split(cfg, seed, Split::train, counts.train),
                generate_random_split(cfg, seed, Split::validation, counts.validation),
                generate_random_split(cfg, seed, Split::test, counts.test)};
    const Dataset all = generate_mobility_trajectory(cfg, seed, counts.total());
    return {slice(all, 0, counts.train, Split::train),
            slice(all, counts.train, counts.validation, Split::validation),
            slice(all, counts.train + counts.validation, counts.test, Split::test)};
}

inline std::filesystem::path dataset_path(const std::filesystem::path& dir, Split split)
{
    return dir / (std::string(to_string(split)) + ".cfmm");
}

/// Writes train.cfmm, val.cfmm and test.cfmm into `dir`. Refuses to touch
/// existing files unless `force`; checks all three before writing any.
inline void save_datasets(const DatasetSplits& splits, const std::filesystem::path& dir, bool force)
{
    const Dataset* parts[] = {&splits.train, &splits.validation, &splits.test};
    if (!force)
        for (const Dataset* d : parts)
            if (std::filesystem::exists(dataset_path(dir, d->header.split)))
                throw ValidationError(dataset_path(dir, d->header.split).string()
                                      + " already exists (use --force to overwrite)");
    for (const Dataset* d : parts)
        save_dataset(*d, dataset_path(dir, d->header.split), true);
}

} // namespace cfmm
