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

#include <stdexcept>
#include <string>

namespace cfmm {

// Bad arguments, dimension mismatches, invalid configuration values.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed, truncated or mismatched files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical procedures that could not reach a decision.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    ok = 0,
    validation = 2,
    format = 3,
    runtime = 4,
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
        throw ValidationError(what);
}

} // namespace cfmm
