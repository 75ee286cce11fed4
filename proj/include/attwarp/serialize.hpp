/*
 * Copyright 2026 The attwarp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "attwarp/chains.hpp"
#include "attwarp/metrics.hpp"
#include "attwarp/warp.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace attwarp
{

/// {"width", "height", "fx": [W], "fy": [H], "x_knots": {...}, "y_knots": {...}}.
/// fx/fy are the sampled output->input maps; the knot tables make the field
/// reload exactly.
[[nodiscard]] nlohmann::json warp_field_to_json(const WarpField<double>& field);

/// Accepts the full form or the minimal {"width", "height", "fx", "fy"}.
[[nodiscard]] WarpField<double> warp_field_from_json(const nlohmann::json& j);

/// Per-step KL values, stop reason, and (optionally) file names of the step
/// and composed fields.
[[nodiscard]] nlohmann::json chain_trace_to_json(const ChainTrace& trace,
                                                 const std::vector<std::string>& step_field_refs = {},
                                                 const std::optional<std::string>& composed_field_ref = {});

[[nodiscard]] nlohmann::json metric_report_to_json(const MetricReport& report);

/// Fixed-width text table of the corpus metrics.
[[nodiscard]] std::string metric_summary_text(const MetricReport& report);

/// Unit-mass horizontal and vertical marginals of a score matrix:
/// {"width", "height", "m_x": [W], "m_y": [H]}. Throws on zero mass.
[[nodiscard]] nlohmann::json marginal_targets_to_json(const ScoreMatrix& scores);

}  // namespace attwarp
