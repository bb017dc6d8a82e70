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
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfmm/config.hpp"
#include "cfmm/errors.hpp"

namespace cfmm {

struct Position {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Position&, const Position&) = default;
};

using Rng = std::mt19937_64;

/// Independent generator for one (stream, index) pair under a master seed.
/// Every dataset sample draws from its own stream so that samples can be
/// produced in any order, or in parallel, with identical results.
inline Rng make_stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Shortest distance on the square torus of side `side`; edges wrap around.
inline double torus_distance(Position a, Position b, double side)
{
    double dx = std::abs(a.x - b.x);
    double dy = std::abs(a.y - b.y);
    dx = std::min(dx, side - dx);
    dy = std::min(dy, side - dy);
    return std::hypot(dx, dy);
}

/// Hata-COST231 constant L in dB (f in MHz, heights in meters).
inline double hata_constant_db(const SystemConfig& cfg)
{
    const double f_mhz = cfg.carrier_freq_hz / 1e6;
    const double lf = std::log10(f_mhz);
    return 46.3 + 33.9 * lf - 13.82 * std::log10(cfg.ap_height_m)
           - (1.1 * lf - 0.7) * cfg.user_height_m + (1.56 * lf - 0.8);
}

/// Three-slope pathloss in dB (a negative number). Exponent 3.5 beyond d1,
/// 2 between d0 and d1, flat inside d0. Distances below 1 m are clamped.
inline double path_loss_db(double distance_m, const SystemConfig& cfg)
{
    const double L = hata_constant_db(cfg);
    const double d = std::max(distance_m, 1.0) / 1000.0;
    const double d0 = cfg.d0_m / 1000.0;
    const double d1 = cfg.d1_m / 1000.0;
    if (d > d1)
        return -L - 35.0 * std::log10(d);
    if (d > d0)
        return -L - 15.0 * std::log10(d1) - 20.0 * std::log10(d);
    return -L - 15.0 * std::log10(d1) - 20.0 * std::log10(d0);
}

/// Linear-scale beta (M x K) from positions and standard-normal shadowing draws.
inline Eigen::MatrixXd large_scale_fading(const SystemConfig& cfg, const std::vector<Position>& aps,
                                          const std::vector<Position>& users,
                                          const Eigen::MatrixXd& shadow_draws)
{
    const auto m_count = static_cast<Eigen::Index>(aps.size());
    const auto k_count = static_cast<Eigen::Index>(users.size());
    require(shadow_draws.rows() == m_count && shadow_draws.cols() == k_count,
            "shadow_draws must be M x K");
    Eigen::MatrixXd beta(m_count, k_count);
    for (Eigen::Index m = 0; m < m_count; ++m) {
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const double d = torus_distance(aps[m], users[k], cfg.area_side_m);
            const double db = path_loss_db(d, cfg) + cfg.shadow_std_db * shadow_draws(m, k);
            beta(m, k) = std::pow(10.0, db / 10.0);
        }
    }
    return beta;
}

enum class Placement : std::uint32_t { uniform_random = 0, grid_aps = 1 };

struct NetworkRealization {
    std::vector<Position> ap_positions;
    std::vector<Position> user_positions;
    Eigen::MatrixXd beta; // M x K, linear
    std::uint64_t seed = 0;
};

/// Nearest-to-square rows x cols factorization of M with cols >= rows
/// (30 -> 5 rows of 6).
inline std::pair<int, int> nearest_square_grid(int num_aps)
{
    require(num_aps >= 1, "num_aps must be >= 1");
    int rows = static_cast<int>(std::sqrt(static_cast<double>(num_aps)));
    while (rows > 1 && num_aps % rows != 0)
        --rows;
    return {rows, num_aps / rows};
}

inline std::vector<Position> grid_ap_positions(const SystemConfig& cfg)
{
    require(cfg.grid_rows > 0 && cfg.grid_cols > 0,
            "grid placement needs grid_rows and grid_cols");
    require(cfg.grid_rows * cfg.grid_cols == cfg.num_aps, "grid_rows * grid_cols must equal num_aps");
    const double dx = cfg.area_side_m / cfg.grid_cols;
    const double dy = cfg.area_side_m / cfg.grid_rows;
    std::vector<Position> aps;
    aps.reserve(static_cast<std::size_t>(cfg.num_aps));
    for (int r = 0; r < cfg.grid_rows; ++r)
        for (int c = 0; c < cfg.grid_cols; ++c)
            aps.push_back({(c + 0.5) * dx, (r + 0.5) * dy});
    return aps;
}

inline std::vector<Position> uniform_positions(int count, double side, Rng& rng)
{
    std::uniform_real_distribution<double> coord(0.0, side);
    std::vector<Position> out(static_cast<std::size_t>(count));
    for (auto& p : out) {
        p.x = coord(rng);
        p.y = coord(rng);
    }
    return out;
}

inline Eigen::MatrixXd shadow_draws(int m_count, int k_count, Rng& rng)
{
    std::normal_distribution<double> z;
    Eigen::MatrixXd out(m_count, k_count);
    for (int m = 0; m < m_count; ++m)
        for (int k = 0; k < k_count; ++k)
            out(m, k) = z(rng);
    return out;
}

/// Draw order: AP positions (random mode only), user positions, shadowing.
inline NetworkRealization generate_realization(const SystemConfig& cfg, Rng& rng, Placement placement)
{
    NetworkRealization net;
    net.ap_positions = placement == Placement::grid_aps
                           ? grid_ap_positions(cfg)
                           : uniform_positions(cfg.num_aps, cfg.area_side_m, rng);
    net.user_positions = uniform_positions(cfg.num_users, cfg.area_side_m, rng);
    net.beta = large_scale_fading(cfg, net.ap_positions, net.user_positions,
                                  shadow_draws(cfg.num_aps, cfg.num_users, rng));
    return net;
}

inline NetworkRealization generate_realization(const SystemConfig& cfg, std::uint64_t seed,
                                               Placement placement)
{
    cfg.validate();
    Rng rng(seed);
    auto net = generate_realization(cfg, rng, placement);
    net.seed = seed;
    return net;
}

// ---------------------------------------------------------------------------
// Mobility

enum class Direction : std::uint8_t { left, right, up, down };

struct MobilityState {
    std::vector<Position> user_positions;
    std::vector<double> speeds; // m/s
    std::vector<Direction> directions;
    double time_since_change = 0.0;
};

struct MobilityParams {
    double max_speed = 20.0;     // m/s
    double change_period = 5.0;  // s
};

inline void redraw_motion(MobilityState& state, const MobilityParams& params, Rng& rng)
{
    std::uniform_real_distribution<double> speed(0.0, params.max_speed);
    std::uniform_int_distribution<int> dir(0, 3);
    for (std::size_t k = 0; k < state.user_positions.size(); ++k) {
        state.speeds[k] = speed(rng);
        state.directions[k] = static_cast<Direction>(dir(rng));
    }
    state.time_since_change = 0.0;
}

inline MobilityState init_mobility(const SystemConfig& cfg, Rng& rng, const MobilityParams& params = {})
{
    MobilityState state;
    state.user_positions = uniform_positions(cfg.num_users, cfg.area_side_m, rng);
    state.speeds.assign(state.user_positions.size(), 0.0);
    state.directions.assign(state.user_positions.size(), Direction::right);
    redraw_motion(state, params, rng);
    return state;
}

inline Direction reversed(Direction d)
{
    switch (d) {
    case Direction::left: return Direction::right;
    case Direction::right: return Direction::left;
    case Direction::up: return Direction::down;
    case Direction::down: return Direction::up;
    }
    return d;
}

/// Advance every user by dt seconds. Motion is redrawn every change_period
/// seconds; hitting an edge reflects the user back inside and reverses its
/// direction.
inline MobilityState step_mobility(MobilityState state, double dt, const SystemConfig& cfg, Rng& rng,
                                   const MobilityParams& params = {})
{
    if (state.time_since_change >= params.change_period)
        redraw_motion(state, params, rng);

    const double side = cfg.area_side_m;
    const auto reflect = [side](double v, bool& hit) {
        if (v > side) {
            hit = true;
            v = 2.0 * side - v;
        } else if (v < 0.0) {
            hit = true;
            v = -v;
        }
        return std::clamp(v, 0.0, side);
    };

    for (std::size_t k = 0; k < state.user_positions.size(); ++k) {
        auto& p = state.user_positions[k];
        const double step = state.speeds[k] * dt;
        bool hit = false;
        switch (state.directions[k]) {
        case Direction::left: p.x = reflect(p.x - step, hit); break;
        case Direction::right: p.x = reflect(p.x + step, hit); break;
        case Direction::up: p.y = reflect(p.y + step, hit); break;
        case Direction::down: p.y = reflect(p.y - step, hit); break;
        }
        if (hit)
            state.directions[k] = reversed(state.directions[k]);
    }
    state.time_since_change += dt;
    return state;
}

} // namespace cfmm
