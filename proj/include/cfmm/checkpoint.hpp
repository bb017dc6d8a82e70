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

// Checkpoint files (little-endian):
//
//   "CFMC" magic, u32 version (1)
//   u32 M, u32 K, u32 layer count
//   per layer: u32 outputs, u32 inputs, u8 activation (0 elu, 1 sigmoid),
//              f64[outputs*inputs] weights (column-major), f64[outputs] bias
//   u8 input transform (0 log_db, 1 linear), f64[MK] mean, f64[MK] std
//   u64 history length, per entry: i64 iteration, f64 train loss, f64 validation loss
//   i64 best iteration, u64 config digest
//   u64 FNV-1a digest of all preceding bytes

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfmm/binary_io.hpp"
#include "cfmm/dnn.hpp"

namespace cfmm {

struct Checkpoint {
    Mlp model;
    std::vector<HistoryEntry> history;
    std::int64_t best_iteration = 0;
    std::uint64_t config_digest = 0;
};

inline constexpr std::array<char, 4> checkpoint_magic{'C', 'F', 'M', 'C'};
inline constexpr std::uint32_t checkpoint_version = 1;

inline std::string serialize(const Checkpoint& ck)
{
    const Mlp& m = ck.model;
    m.validate();
    ByteWriter w;
    w.put_bytes({checkpoint_magic.data(), checkpoint_magic.size()});
    w.put(checkpoint_version);
    w.put(static_cast<std::uint32_t>(m.num_aps));
    w.put(static_cast<std::uint32_t>(m.num_users));
    w.put(static_cast<std::uint32_t>(m.layers.size()));
    for (const auto& l : m.layers) {
        w.put(static_cast<std::uint32_t>(l.outputs()));
        w.put(static_cast<std::uint32_t>(l.inputs()));
        w.put(static_cast<std::uint8_t>(l.activation));
        w.put_doubles(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
        w.put_doubles(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    w.put(static_cast<std::uint8_t>(m.normalizer.transform));
    w.put_doubles(m.normalizer.mean.data(), static_cast<std::size_t>(m.normalizer.mean.size()));
    w.put_doubles(m.normalizer.std.data(), static_cast<std::size_t>(m.normalizer.std.size()));
    w.put(static_cast<std::uint64_t>(ck.history.size()));
    for (const auto& h : ck.history) {
        w.put(h.iteration);
        w.put(h.train_loss);
        w.put(h.validation_loss);
    }
    w.put(ck.best_iteration);
    w.put(ck.config_digest);
    w.seal();
    return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& name = "checkpoint")
{
    ByteReader r(bytes, name);
    if (r.get_bytes(4) != std::string_view(checkpoint_magic.data(), 4))
        throw FormatError(name + ": bad magic (not a checkpoint file)");
    if (const auto v = r.get<std::uint32_t>(); v != checkpoint_version)
        throw FormatError(name + ": unsupported version " + std::to_string(v));

    Checkpoint ck;
    Mlp& m = ck.model;
    m.num_aps = static_cast<int>(r.get<std::uint32_t>());
    m.num_users = static_cast<int>(r.get<std::uint32_t>());
    const auto layer_count = r.get<std::uint32_t>();
    if (m.num_aps <= 0 || m.num_users <= 0 || layer_count == 0 || layer_count > 64)
        throw FormatError(name + ": corrupted header");
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        const auto outputs = r.get<std::uint32_t>();
        const auto inputs = r.get<std::uint32_t>();
        const auto act = r.get<std::uint8_t>();
        if (act > 1 || outputs == 0 || inputs == 0
            || std::uint64_t{outputs} * inputs > r.remaining() / sizeof(double))
            throw FormatError(name + ": corrupted layer header");
        DenseLayer l;
        l.activation = static_cast<Activation>(act);
        l.weights.resize(outputs, inputs);
        l.bias.resize(outputs);
        r.get_doubles(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
        r.get_doubles(l.bias.data(), outputs);
        m.layers.push_back(std::move(l));
    }
    const auto transform = r.get<std::uint8_t>();
    if (transform > 1)
        throw FormatError(name + ": unknown input transform");
    const auto dim = m.input_dim();
    m.normalizer.transform = static_cast<InputTransform>(transform);
    m.normalizer.mean.resize(dim);
    m.normalizer.std.resize(dim);
    r.get_doubles(m.normalizer.mean.data(), static_cast<std::size_t>(dim));
    r.get_doubles(m.normalizer.std.data(), static_cast<std::size_t>(dim));
    const auto hist = r.get<std::uint64_t>();
    if (hist > r.remaining() / 24)
        throw FormatError(name + ": truncated file");
    ck.history.resize(hist);
    for (auto& h : ck.history) {
        h.iteration = r.get<std::int64_t>();
        h.train_loss = r.get<double>();
        h.validation_loss = r.get<double>();
    }
    ck.best_iteration = r.get<std::int64_t>();
    ck.config_digest = r.get<std::uint64_t>();
    r.verify_seal();
    try {
        m.validate();
    } catch (const ValidationError& e) {
        throw FormatError(name + ": " + e.what());
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path, bool force)
{
    write_file(path, serialize(ck), force);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    return deserialize_checkpoint(read_file(path), path.string());
}

} // namespace cfmm
