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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>

#include "cfmm/errors.hpp"

namespace cfmm {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class ByteWriter {
public:
    template <class T>
        requires std::is_trivially_copyable_v<T>
    void put(T v)
    {
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf_.append(raw, sizeof(T));
    }

    void put_bytes(std::string_view s) { buf_.append(s); }

    void put_doubles(const double* p, std::size_t n)
    {
        buf_.append(reinterpret_cast<const char*>(p), n * sizeof(double));
    }

    // Appends the FNV-1a digest of everything written so far.
    void seal() { put(fnv1a(buf_)); }

    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    template <class T>
        requires std::is_trivially_copyable_v<T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string_view get_bytes(std::size_t n)
    {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void get_doubles(double* out, std::size_t n)
    {
        need(n * sizeof(double));
        std::memcpy(out, data_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
    }

    /// Checks the trailing digest written by ByteWriter::seal and that
    /// nothing follows it.
    void verify_seal()
    {
        const std::size_t body = pos_;
        const auto stored = get<std::uint64_t>();
        if (stored != fnv1a(data_.substr(0, body)))
            throw FormatError(what_ + ": digest mismatch");
        if (pos_ != data_.size())
            throw FormatError(what_ + ": trailing bytes after digest");
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n)
            throw FormatError(what_ + ": truncated file");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes, bool force)
{
    if (!force && std::filesystem::exists(path))
        throw ValidationError(path.string() + " already exists (use --force to overwrite)");
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

} // namespace cfmm
