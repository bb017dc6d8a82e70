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
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "cfmm/errors.hpp"

namespace cfmm {

struct CdfPoint {
    double value = 0.0;
    double probability = 0.0;
    friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::span<const double> values) : sorted_(values.begin(), values.end())
    {
        require(!sorted_.empty(), "empirical CDF of an empty sample");
        std::sort(sorted_.begin(), sorted_.end());
    }

    /// Fraction of samples <= x.
    double operator()(double x) const
    {
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    /// Linear interpolation between order statistics at rank p (n - 1).
    double percentile(double p) const
    {
        require(p >= 0.0 && p <= 1.0, "percentile rank must be in [0,1]");
        const double h = p * static_cast<double>(sorted_.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, sorted_.size() - 1);
        return sorted_[lo] + (h - static_cast<double>(lo)) * (sorted_[hi] - sorted_[lo]);
    }

    /// (percentile(p), p) on a uniform probability grid of `grid` points.
    std::vector<CdfPoint> points(std::size_t grid) const
    {
        require(grid >= 2, "CDF grid needs at least 2 points");
        std::vector<CdfPoint> out(grid);
        for (std::size_t i = 0; i < grid; ++i) {
            const double p = static_cast<double>(i) / static_cast<double>(grid - 1);
            out[i] = {percentile(p), p};
        }
        return out;
    }

    double min() const { return sorted_.front(); }
    double max() const { return sorted_.back(); }
    const std::vector<double>& sorted() const { return sorted_; }

private:
    std::vector<double> sorted_;
};

/// Sum in index order.
inline double ordered_mean(std::span<const double> v)
{
    require(!v.empty(), "mean of an empty sample");
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

} // namespace cfmm
