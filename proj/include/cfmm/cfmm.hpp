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

#include "cfmm/binary_io.hpp"
#include "cfmm/checkpoint.hpp"
#include "cfmm/config.hpp"
#include "cfmm/config_io.hpp"
#include "cfmm/dataset.hpp"
#include "cfmm/dnn.hpp"
#include "cfmm/errors.hpp"
#include "cfmm/geometry.hpp"
#include "cfmm/harness.hpp"
#include "cfmm/rate_model.hpp"
#include "cfmm/report.hpp"
#include "cfmm/solver.hpp"
#include "cfmm/stats.hpp"
