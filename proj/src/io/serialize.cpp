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

#include "attwarp/serialize.hpp"

#include "attwarp/io.hpp"

#include <cstdio>
#include <sstream>

namespace attwarp
{

using nlohmann::json;

namespace
{
std::vector<double> to_std(const Vector<double>& v)
{
    return {v.data(), v.data() + v.size()};
}

Vector<double> to_eigen(const std::vector<double>& v)
{
    return Eigen::Map<const Vector<double>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json knots_to_json(const AxisMap<double>& map)
{
    return {{"input", to_std(map.input_knots())}, {"output", to_std(map.output_knots())}};
}

AxisMap<double> map_from_knots(const json& j)
{
    return {to_eigen(j.at("input").get<std::vector<double>>()), to_eigen(j.at("output").get<std::vector<double>>())};
}

// Rebuilds a backward map from its samples at integer output positions.
AxisMap<double> map_from_samples(const std::vector<double>& samples, Eigen::Index length)
{
    if (static_cast<Eigen::Index>(samples.size()) != length || length <= 0)
    {
        throw FormatError("warp field: sample count does not match dimension");
    }
    std::vector<double> in;
    std::vector<double> out;
    for (std::size_t k = 0; k < samples.size(); ++k)
    {
        if (in.empty() || samples[k] > in.back())
        {
            in.push_back(samples[k]);
            out.push_back(static_cast<double>(k));
        }
    }
    const auto end = static_cast<double>(length);
    if (in.back() < end)
    {
        in.push_back(end);
        out.push_back(end);
    }
    if (in.front() != 0.0)
    {
        throw FormatError("warp field: fx/fy must start at 0");
    }
    return {to_eigen(in), to_eigen(out)};
}
}  // namespace

json warp_field_to_json(const WarpField<double>& field)
{
    return {{"width", field.width()},
            {"height", field.height()},
            {"fx", to_std(field.fx_samples())},
            {"fy", to_std(field.fy_samples())},
            {"x_knots", knots_to_json(field.x_map())},
            {"y_knots", knots_to_json(field.y_map())}};
}

WarpField<double> warp_field_from_json(const json& j)
{
    try
    {
        const auto width = j.at("width").get<Eigen::Index>();
        const auto height = j.at("height").get<Eigen::Index>();
        WarpField<double> field;
        if (j.contains("x_knots") && j.contains("y_knots"))
        {
            field = WarpField<double>(map_from_knots(j.at("x_knots")), map_from_knots(j.at("y_knots")));
        }
        else
        {
            field = WarpField<double>(map_from_samples(j.at("fx").get<std::vector<double>>(), width),
                                      map_from_samples(j.at("fy").get<std::vector<double>>(), height));
        }
        if (field.width() != width || field.height() != height)
        {
            throw FormatError("warp field: knot range does not match dimensions");
        }
        return field;
    }
    catch (const json::exception& e)
    {
        throw FormatError(std::string("warp field: ") + e.what());
    }
    catch (const std::invalid_argument& e)
    {
        throw FormatError(std::string("warp field: ") + e.what());
    }
}

json chain_trace_to_json(const ChainTrace& trace,
                         const std::vector<std::string>& step_field_refs,
                         const std::optional<std::string>& composed_field_ref)
{
    json steps = json::array();
    for (std::size_t k = 0; k < trace.steps.size(); ++k)
    {
        const ChainStep& step = trace.steps[k];
        json s = {{"depth", step.depth}, {"kl", step.kl ? json(*step.kl) : json(nullptr)}};
        if (k < step_field_refs.size())
        {
            s["step_field"] = step_field_refs[k];
        }
        steps.push_back(std::move(s));
    }
    json out = {{"stop_reason", std::string(to_string(trace.stop_reason))},
                {"depth", trace.steps.size()},
                {"steps", std::move(steps)}};
    if (composed_field_ref)
    {
        out["composed_field"] = *composed_field_ref;
    }
    return out;
}

json metric_report_to_json(const MetricReport& report)
{
    json samples = json::array();
    for (const auto& s : report.samples)
    {
        samples.push_back({{"id", s.id},
                           {"pointing_game_hit", s.pointing_hit},
                           {"proportion", s.proportion},
                           {"expansion_ratios", s.expansion.ratios},
                           {"zero_area_boxes", s.expansion.zero_area_boxes}});
    }
    const CorpusMetrics& c = report.corpus;
    return {{"samples", std::move(samples)},
            {"corpus",
             {{"samples", c.samples},
              {"pointing_game_rate", c.pointing_rate},
              {"mean_proportion", c.mean_proportion},
              {"boxes", c.boxes},
              {"zero_area_boxes", c.zero_area_boxes},
              {"fraction_expanded", c.fraction_expanded},
              {"mean_area_increase", c.mean_increase}}},
            {"skipped_lines", report.skipped_lines}};
}

std::string metric_summary_text(const MetricReport& report)
{
    const CorpusMetrics& c = report.corpus;
    std::ostringstream out;
    char line[128];
    auto row = [&](const char* name, const char* fmt, auto value) {
        std::snprintf(line, sizeof(line), "%-22s", name);
        out << line;
        std::snprintf(line, sizeof(line), fmt, value);
        out << line << '\n';
    };
    row("samples", "%zu", c.samples);
    row("skipped lines", "%zu", report.skipped_lines);
    row("pointing game", "%.4f", c.pointing_rate);
    row("proportion (mean)", "%.4f", c.mean_proportion);
    row("boxes", "%zu", c.boxes);
    row("zero-area boxes", "%zu", c.zero_area_boxes);
    row("expanded fraction", "%.4f", c.fraction_expanded);
    row("mean area increase", "%+.4f", c.mean_increase);
    return out.str();
}

json marginal_targets_to_json(const ScoreMatrix& scores)
{
    const auto [horizontal, vertical] = marginals(scores);
    const double total = horizontal.values.sum();
    if (!(total > 0.0))
    {
        throw std::invalid_argument("marginal targets: zero-mass attention map");
    }
    return {{"width", scores.cols()},
            {"height", scores.rows()},
            {"m_x", to_std(horizontal.values / total)},
            {"m_y", to_std(vertical.values / vertical.values.sum())}};
}

}  // namespace attwarp
