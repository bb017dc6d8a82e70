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

// JSON configuration files:
//
//   { "system":   { "num_aps": 30, "num_users": 5, ... },
//     "train":    { "iterations": 10000, "input_transform": "linear", ... },
//     "finetune": { "iterations": 100, "learning_rate": 0.01 } }
//
// Every section and key is optional; unknown ones are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "cfmm/binary_io.hpp"
#include "cfmm/config.hpp"
#include "cfmm/dnn.hpp"
#include "cfmm/errors.hpp"

namespace cfmm {

using Json = nlohmann::json;

struct RunConfig {
    SystemConfig system;
    TrainConfig train;
    FinetuneConfig finetune;
};

namespace detail {

template <class T>
void read_key(const Json& obj, const char* key, T& field)
{
    if (auto it = obj.find(key); it != obj.end()) {
        try {
            field = it->get<T>();
        } catch (const Json::exception& e) {
            throw ValidationError(std::string("config key '") + key + "': " + e.what());
        }
    }
}

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> known, const std::string& section)
{
    if (!obj.is_object())
        throw ValidationError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            ok = ok || key == k;
        if (!ok)
            throw ValidationError("unknown config key '" + section + "." + key + "'");
    }
}

inline InputTransform parse_transform(const std::string& s)
{
    if (s == "log_db")
        return InputTransform::log_db;
    if (s == "linear")
        return InputTransform::linear;
    throw ValidationError("input_transform must be 'log_db' or 'linear', got '" + s + "'");
}

} // namespace detail

inline Json to_json(const SystemConfig& c)
{
    return Json{{"carrier_freq_hz", c.carrier_freq_hz},
                {"area_side_m", c.area_side_m},
                {"ap_height_m", c.ap_height_m},
                {"user_height_m", c.user_height_m},
                {"d0_m", c.d0_m},
                {"d1_m", c.d1_m},
                {"bandwidth_hz", c.bandwidth_hz},
                {"noise_figure_db", c.noise_figure_db},
                {"shadow_std_db", c.shadow_std_db},
                {"pilot_power_mw", c.pilot_power_mw},
                {"data_power_mw", c.data_power_mw},
                {"coherence_samples", c.coherence_samples},
                {"pilot_length", c.pilot_length},
                {"num_aps", c.num_aps},
                {"num_users", c.num_users},
                {"grid_rows", c.grid_rows},
                {"grid_cols", c.grid_cols}};
}

inline Json to_json(const TrainConfig& c)
{
    return Json{{"iterations", c.iterations},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"validation_every", c.validation_every},
                {"adam_beta1", c.adam.beta1},
                {"adam_beta2", c.adam.beta2},
                {"adam_epsilon", c.adam.epsilon},
                {"seed", c.seed},
                {"input_transform", to_string(c.input_transform)}};
}

inline Json to_json(const FinetuneConfig& c)
{
    return Json{{"iterations", c.iterations}, {"learning_rate", c.learning_rate}};
}

inline Json to_json(const RunConfig& c)
{
    return Json{{"system", to_json(c.system)}, {"train", to_json(c.train)}, {"finetune", to_json(c.finetune)}};
}

inline RunConfig run_config_from_json(const Json& root)
{
    detail::reject_unknown(root, {"system", "train", "finetune"}, "<root>");
    RunConfig rc;
    bool pilot_given = false;
    if (auto it = root.find("system"); it != root.end()) {
        const Json& s = *it;
        detail::reject_unknown(s,
                               {"carrier_freq_hz", "area_side_m", "ap_height_m", "user_height_m", "d0_m", "d1_m",
                                "bandwidth_hz", "noise_figure_db", "shadow_std_db", "pilot_power_mw",
                                "data_power_mw", "coherence_samples", "pilot_length", "num_aps", "num_users",
                                "grid_rows", "grid_cols"},
                               "system");
        auto& c = rc.system;
        detail::read_key(s, "carrier_freq_hz", c.carrier_freq_hz);
        detail::read_key(s, "area_side_m", c.area_side_m);
        detail::read_key(s, "ap_height_m", c.ap_height_m);
        detail::read_key(s, "user_height_m", c.user_height_m);
        detail::read_key(s, "d0_m", c.d0_m);
        detail::read_key(s, "d1_m", c.d1_m);
        detail::read_key(s, "bandwidth_hz", c.bandwidth_hz);
        detail::read_key(s, "noise_figure_db", c.noise_figure_db);
        detail::read_key(s, "shadow_std_db", c.shadow_std_db);
        detail::read_key(s, "pilot_power_mw", c.pilot_power_mw);
        detail::read_key(s, "data_power_mw", c.data_power_mw);
        detail::read_key(s, "coherence_samples", c.coherence_samples);
        detail::read_key(s, "num_aps", c.num_aps);
        detail::read_key(s, "num_users", c.num_users);
        detail::read_key(s, "grid_rows", c.grid_rows);
        detail::read_key(s, "grid_cols", c.grid_cols);
        pilot_given = s.contains("pilot_length");
        detail::read_key(s, "pilot_length", c.pilot_length);
    }
    // Orthogonal pilots unless told otherwise.
    if (!pilot_given)
        rc.system.pilot_length = rc.system.num_users;

    if (auto it = root.find("train"); it != root.end()) {
        const Json& t = *it;
        detail::reject_unknown(t,
                               {"iterations", "batch_size", "learning_rate", "validation_every", "adam_beta1",
                                "adam_beta2", "adam_epsilon", "seed", "input_transform"},
                               "train");
        auto& c = rc.train;
        detail::read_key(t, "iterations", c.iterations);
        detail::read_key(t, "batch_size", c.batch_size);
        detail::read_key(t, "learning_rate", c.learning_rate);
        detail::read_key(t, "validation_every", c.validation_every);
        detail::read_key(t, "adam_beta1", c.adam.beta1);
        detail::read_key(t, "adam_beta2", c.adam.beta2);
        detail::read_key(t, "adam_epsilon", c.adam.epsilon);
        detail::read_key(t, "seed", c.seed);
        std::string transform = to_string(c.input_transform);
        detail::read_key(t, "input_transform", transform);
        c.input_transform = detail::parse_transform(transform);
    }
    if (auto it = root.find("finetune"); it != root.end()) {
        const Json& f = *it;
        detail::reject_unknown(f, {"iterations", "learning_rate"}, "finetune");
        detail::read_key(f, "iterations", rc.finetune.iterations);
        detail::read_key(f, "learning_rate", rc.finetune.learning_rate);
    }
    rc.system.validate();
    rc.train.validate();
    require(rc.finetune.iterations >= 0 && rc.finetune.learning_rate > 0, "invalid finetune section");
    return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    const std::string text = read_file(path);
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return run_config_from_json(root);
}

/// Stable digest of the physical configuration (keys are emitted sorted).
inline std::uint64_t config_digest(const SystemConfig& c)
{
    return fnv1a(to_json(c).dump());
}

inline std::string hex_digest(std::uint64_t d)
{
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, d >>= 4)
        s[static_cast<std::size_t>(i)] = digits[d & 0xf];
    return s;
}

} // namespace cfmm
