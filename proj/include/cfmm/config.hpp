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
#include <cstdint>

#include "cfmm/errors.hpp"

namespace cfmm {

/// Physical parameters of one cell-free deployment. Defaults reproduce the
/// reference scenario: 1 km square, 1.9 GHz, 20 MHz, 100 mW pilot and data
/// power, 30 APs serving 5 users with orthogonal pilots.
struct SystemConfig {
    double carrier_freq_hz = 1.9e9;
    double area_side_m = 1000.0;
    double ap_height_m = 15.0;
    double user_height_m = 1.65;
    double d0_m = 10.0;
    double d1_m = 50.0;
    double bandwidth_hz = 20e6;
    double noise_figure_db = 9.0;
    double shadow_std_db = 8.0;
    double pilot_power_mw = 100.0;
    double data_power_mw = 100.0;
    int coherence_samples = 200;
    int pilot_length = 5;
    int num_aps = 30;
    int num_users = 5;
    // AP grid used by the fixed-AP placement; 0 means "not configured".
    int grid_rows = 0;
    int grid_cols = 0;

    void validate() const
    {
        require(carrier_freq_hz > 0, "carrier_freq_hz must be positive");
        require(area_side_m > 0, "area_side_m must be positive");
        require(ap_height_m > 0 && user_height_m > 0, "antenna heights must be positive");
        require(0 < d0_m && d0_m < d1_m && d1_m < area_side_m, "require 0 < d0 < d1 < D");
        require(bandwidth_hz > 0, "bandwidth_hz must be positive");
        require(shadow_std_db >= 0, "shadow_std_db must be non-negative");
        require(pilot_power_mw > 0 && data_power_mw > 0, "transmit powers must be positive");
        require(num_aps >= 1, "num_aps must be >= 1");
        require(num_users >= 1, "num_users must be >= 1");
        require(pilot_length >= 1, "pilot_length must be >= 1");
        require(pilot_length < coherence_samples, "pilot_length must be < coherence_samples");
        require(grid_rows >= 0 && grid_cols >= 0, "grid dimensions must be non-negative");
    }
};

/// Reference configuration for given (M, K) with orthogonal pilots (tau = K).
inline SystemConfig reference_config(int num_aps, int num_users)
{
    SystemConfig cfg;
    cfg.num_aps = num_aps;
    cfg.num_users = num_users;
    cfg.pilot_length = num_users;
    return cfg;
}

struct NormalizedSnr {
    double data;  // rho
    double pilot; // rho_p
};

inline double noise_power_dbm(const SystemConfig& cfg)
{
    return -174.0 + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db;
}

/// Transmit power over thermal noise power across the band, both linear.
inline NormalizedSnr normalized_snr(const SystemConfig& cfg)
{
    const double noise_dbm = noise_power_dbm(cfg);
    const auto to_ratio = [&](double power_mw) {
        return std::pow(10.0, (10.0 * std::log10(power_mw) - noise_dbm) / 10.0);
    };
    return {to_ratio(cfg.data_power_mw), to_ratio(cfg.pilot_power_mw)};
}

} // namespace cfmm
