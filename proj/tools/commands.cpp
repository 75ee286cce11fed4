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

#include "commands.hpp"

#include "attwarp/io.hpp"
#include "attwarp/metrics.hpp"
#include "attwarp/serialize.hpp"
#include "attwarp/warp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace attwarp::cli
{

using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

constexpr const char* kToolVersion = "attwarp 1.0.0";

std::mutex g_log_mutex;

void log_error(const std::string& message)
{
    const std::lock_guard lock(g_log_mutex);
    std::cerr << "error: " << message << '\n';
}

void log_warning(const std::string& message)
{
    const std::lock_guard lock(g_log_mutex);
    std::cerr << "warning: " << message << '\n';
}

unsigned worker_count(unsigned requested, std::size_t items)
{
    unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(items, 1)));
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body)
{
    const unsigned workers = worker_count(jobs, count);
    if (workers <= 1)
    {
        for (std::size_t k = 0; k < count; ++k)
        {
            body(k);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
    {
        pool.emplace_back([&] {
            for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1))
            {
                body(k);
            }
        });
    }
}

int batch_exit_code(std::size_t failures, std::size_t total)
{
    if (failures == 0)
    {
        return kSuccess;
    }
    return failures == total ? kHardFailure : kPartialFailure;
}

std::string policy_name(ResizePolicy::Mode mode)
{
    switch (mode)
    {
        case ResizePolicy::Mode::none:
            return "none";
        case ResizePolicy::Mode::stretch:
            return "stretch";
        case ResizePolicy::Mode::pad:
            return "pad";
    }
    return "none";
}

json resize_json(const ResizePolicy& policy)
{
    return {{"policy", policy_name(policy.mode)}, {"rows", policy.rows}, {"cols", policy.cols}};
}

json map_json(const MapOptions& map)
{
    return {{"transform", std::string(to_string(map.transform))}, {"smooth_k", map.smooth_k}};
}

json file_record(const fs::path& path)
{
    return {{"path", path.generic_string()}, {"sha256", sha256_file(path)}};
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

void ensure_dir(const fs::path& dir)
{
    if (!dir.empty())
    {
        fs::create_directories(dir);
    }
}

template <typename Scalar>
Matrix<Scalar> pad_to_canvas(const Matrix<Scalar>& content, const ContentRect& rect)
{
    if (rect.top == 0 && rect.left == 0 && rect.rows == rect.canvas_rows && rect.cols == rect.canvas_cols)
    {
        return content;
    }
    Matrix<Scalar> canvas = Matrix<Scalar>::Zero(rect.canvas_rows, rect.canvas_cols);
    canvas.block(rect.top, rect.left, rect.rows, rect.cols) = content;
    return canvas;
}

}  // namespace

ContentRect content_rect(const ResizePolicy& policy, Eigen::Index rows, Eigen::Index cols)
{
    ContentRect rect{0, 0, rows, cols, rows, cols};
    if (policy.mode == ResizePolicy::Mode::none)
    {
        return rect;
    }
    rect.canvas_rows = policy.rows;
    rect.canvas_cols = policy.cols;
    if (policy.mode == ResizePolicy::Mode::stretch)
    {
        rect.rows = policy.rows;
        rect.cols = policy.cols;
        return rect;
    }
    const double scale = std::min(static_cast<double>(policy.rows) / static_cast<double>(rows),
                                  static_cast<double>(policy.cols) / static_cast<double>(cols));
    rect.rows = std::clamp<Eigen::Index>(std::lround(static_cast<double>(rows) * scale), 1, policy.rows);
    rect.cols = std::clamp<Eigen::Index>(std::lround(static_cast<double>(cols) * scale), 1, policy.cols);
    rect.top = (policy.rows - rect.rows) / 2;
    rect.left = (policy.cols - rect.cols) / 2;
    return rect;
}

ResizePolicy parse_resize(const std::string& size, const std::string& policy)
{
    ResizePolicy out;
    if (size.empty())
    {
        return out;
    }
    if (policy == "stretch")
    {
        out.mode = ResizePolicy::Mode::stretch;
    }
    else if (policy == "pad")
    {
        out.mode = ResizePolicy::Mode::pad;
    }
    else
    {
        throw std::invalid_argument("unknown resize policy '" + policy + "'");
    }
    const auto x = size.find_first_of("xX");
    try
    {
        std::size_t used = 0;
        if (x == std::string::npos)
        {
            out.rows = out.cols = std::stol(size, &used);
            if (used != size.size())
            {
                throw std::invalid_argument("trailing characters");
            }
        }
        else
        {
            const std::string w = size.substr(0, x);
            const std::string h = size.substr(x + 1);
            out.cols = std::stol(w, &used);
            if (used != w.size())
            {
                throw std::invalid_argument("trailing characters");
            }
            out.rows = std::stol(h, &used);
            if (used != h.size())
            {
                throw std::invalid_argument("trailing characters");
            }
        }
    }
    catch (const std::exception&)
    {
        throw std::invalid_argument("bad resize size '" + size + "' (expected N or WxH)");
    }
    if (out.rows <= 0 || out.cols <= 0)
    {
        throw std::invalid_argument("resize dimensions must be positive");
    }
    return out;
}

RgbImage prepare_image(const RgbImage& image, const ResizePolicy& policy)
{
    const ContentRect rect = content_rect(policy, image.height(), image.width());
    RgbImage out;
    for (const auto& plane : image.channels)
    {
        Matrix<float> resized = lanczos_resize(plane, rect.rows, rect.cols).cwiseMax(0.0f).cwiseMin(1.0f);
        out.channels.push_back(pad_to_canvas(resized, rect));
    }
    return out;
}

ScoreMatrix prepare_attention(const ScoreMatrix& map,
                              Eigen::Index image_rows,
                              Eigen::Index image_cols,
                              const ResizePolicy& policy,
                              const MapOptions& options)
{
    const ContentRect rect = content_rect(policy, image_rows, image_cols);
    ScoreMatrix out;
    if (map.rows() == image_rows && map.cols() == image_cols)
    {
        ScoreMatrix content = lanczos_resize(map, rect.rows, rect.cols).cwiseMax(0.0);
        out = apply_transform(pad_to_canvas(content, rect), options.transform);
    }
    else if (map.rows() == rect.canvas_rows && map.cols() == rect.canvas_cols)
    {
        out = apply_transform(map, options.transform);
    }
    else if (map.rows() <= rect.rows && map.cols() <= rect.cols)
    {
        out = pad_to_canvas(postprocess(map, {rect.rows, rect.cols, options.smooth_k, options.transform}), rect);
    }
    else
    {
        std::ostringstream msg;
        msg << "attention map is " << map.cols() << "x" << map.rows() << " but the image is " << image_cols << "x"
            << image_rows;
        throw std::invalid_argument(msg.str());
    }
    ensure_positive_mass(out);
    return out;
}

int cmd_warp(const WarpJob& job)
{
    if (job.images.empty() || job.images.size() != job.attentions.size())
    {
        log_error("warp needs one --attention per --image");
        return kHardFailure;
    }
    ensure_dir(job.out_dir);
    std::vector<std::optional<std::string>> errors(job.images.size());
    parallel_for(job.images.size(), job.jobs, [&](std::size_t k) {
        const fs::path& image_path = job.images[k];
        const fs::path& attention_path = job.attentions[k];
        try
        {
            const RgbImage original = read_image(image_path);
            const RgbImage image = prepare_image(original, job.resize);
            const ScoreMatrix scores = prepare_attention(read_attention_map(attention_path), original.height(),
                                                         original.width(), job.resize, job.map);
            const auto warped = warp_image(image, build_warp(scores));

            const std::string stem = image_path.stem().string();
            const fs::path image_out = job.out_dir / (stem + "_warped.png");
            const fs::path field_out = job.out_dir / (stem + "_field.json");
            write_image(image_out, warped.pixels);
            write_file_atomic(field_out, dump(warp_field_to_json(warped.field)));
            const json provenance = {
                {"tool", kToolVersion},
                {"command", "warp"},
                {"inputs", {{"image", file_record(image_path)}, {"attention", file_record(attention_path)}}},
                {"config", {{"map", map_json(job.map)}, {"resize", resize_json(job.resize)}}},
                {"outputs", {{"image", file_record(image_out)}, {"field", file_record(field_out)}}}};
            write_file_atomic(job.out_dir / (stem + "_provenance.json"), dump(provenance));
        }
        catch (const std::exception& e)
        {
            errors[k] = e.what();
            log_error(image_path.string() + ": " + e.what());
        }
    });

    json report = json::array();
    std::size_t failures = 0;
    for (std::size_t k = 0; k < job.images.size(); ++k)
    {
        json item = {{"image", job.images[k].generic_string()}, {"ok", !errors[k].has_value()}};
        if (errors[k])
        {
            item["error"] = *errors[k];
            ++failures;
        }
        report.push_back(std::move(item));
    }
    write_file_atomic(job.out_dir / "warp_report.json", dump(report));
    return batch_exit_code(failures, job.images.size());
}

namespace
{
std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (const char ch : s)
    {
        if (ch == '\'')
        {
            out += "'\\''";
        }
        else
        {
            out += ch;
        }
    }
    return out + "'";
}
}  // namespace

int cmd_chain(const ChainJob& job)
{
    if (job.attentions.empty() && !job.extractor_cmd)
    {
        log_error("chain needs --attention maps or --extractor-cmd");
        return kHardFailure;
    }
    try
    {
        job.chain.validate();
        ensure_dir(job.out_dir);
        const RgbImage original = read_image(job.image);
        const RgbImage image = prepare_image(original, job.resize);
        const std::string stem = job.image.stem().string();

        std::size_t depth = 0;
        std::vector<json> attention_inputs;
        AttentionProvider<float> provider = [&](const RgbImage& current) -> std::optional<ScoreMatrix> {
            const std::size_t d = depth++;
            const bool first = d == 0;
            const Eigen::Index rows = first ? original.height() : current.height();
            const Eigen::Index cols = first ? original.width() : current.width();
            const ResizePolicy policy = first ? job.resize : ResizePolicy{};
            if (!job.extractor_cmd)
            {
                if (d >= job.attentions.size())
                {
                    return std::nullopt;
                }
                attention_inputs.push_back(file_record(job.attentions[d]));
                return prepare_attention(read_attention_map(job.attentions[d]), rows, cols, policy, job.map);
            }
            const fs::path tmp_image = job.out_dir / (".attwarp_" + stem + "_depth" + std::to_string(d) + ".png");
            const fs::path tmp_map = job.out_dir / (".attwarp_" + stem + "_depth" + std::to_string(d) + ".atw1");
            write_image(tmp_image, current);
            std::error_code ec;
            fs::remove(tmp_map, ec);
            const std::string command =
                *job.extractor_cmd + " --image " + shell_quote(tmp_image.string()) + " --out " + shell_quote(tmp_map.string());
            const int status = std::system(command.c_str());
            std::optional<ScoreMatrix> result;
            if (status == 0 && fs::exists(tmp_map))
            {
                try
                {
                    attention_inputs.push_back({{"depth", d}, {"sha256", sha256_file(tmp_map)}});
                    result = prepare_attention(read_attention_map(tmp_map), current.height(), current.width(),
                                               ResizePolicy{}, job.map);
                }
                catch (const std::exception& e)
                {
                    log_warning("extractor output at depth " + std::to_string(d) + ": " + e.what());
                }
            }
            else
            {
                log_warning("extractor failed at depth " + std::to_string(d));
            }
            fs::remove(tmp_image, ec);
            fs::remove(tmp_map, ec);
            return result;
        };

        const auto result = run_chain(image, provider, job.chain);

        std::vector<std::string> step_refs;
        for (const auto& step : result.trace.steps)
        {
            const std::string name = stem + "_step" + std::to_string(step.depth) + "_field.json";
            write_file_atomic(job.out_dir / name, dump(warp_field_to_json(step.step_field)));
            step_refs.push_back(name);
        }
        const std::string composed_name = stem + "_composed_field.json";
        const fs::path image_out = job.out_dir / (stem + "_chain.png");
        const fs::path trace_out = job.out_dir / (stem + "_trace.json");
        write_file_atomic(job.out_dir / composed_name, dump(warp_field_to_json(result.warped.field)));
        write_image(image_out, result.warped.pixels);
        write_file_atomic(trace_out, dump(chain_trace_to_json(result.trace, step_refs, composed_name)));

        const json provenance = {
            {"tool", kToolVersion},
            {"command", "chain"},
            {"inputs", {{"image", file_record(job.image)}, {"attention", attention_inputs}}},
            {"config",
             {{"map", map_json(job.map)},
              {"resize", resize_json(job.resize)},
              {"kl_epsilon", job.chain.kl_epsilon},
              {"max_iterations", job.chain.max_iterations},
              {"extractor_cmd", job.extractor_cmd ? json(*job.extractor_cmd) : json(nullptr)}}},
            {"outputs",
             {{"image", file_record(image_out)},
              {"trace", file_record(trace_out)},
              {"composed_field", file_record(job.out_dir / composed_name)}}}};
        write_file_atomic(job.out_dir / (stem + "_provenance.json"), dump(provenance));

        std::cout << "chain stopped: " << to_string(result.trace.stop_reason) << " after "
                  << result.trace.steps.size() << " step(s)\n";
        return result.trace.stop_reason == StopReason::provider_exhausted ? kProviderExhausted : kSuccess;
    }
    catch (const std::exception& e)
    {
        log_error(job.image.string() + ": " + e.what());
        return kHardFailure;
    }
}

namespace
{
fs::path resolve(const fs::path& base, const fs::path& p)
{
    return p.is_absolute() ? p : base / p;
}

BoundingBox parse_box(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4)
    {
        throw std::invalid_argument("box must have 4 coordinates");
    }
    BoundingBox box{v[0], v[1], v[2], v[3]};
    if (!(box.x_min <= box.x_max && box.y_min <= box.y_max))
    {
        throw std::invalid_argument("box has min > max");
    }
    return box;
}
}  // namespace

int cmd_metrics(const MetricsJob& job)
{
    std::ifstream in(job.annotations);
    if (!in)
    {
        log_error("cannot open " + job.annotations.string());
        return kHardFailure;
    }
    const fs::path base = job.annotations.parent_path();
    MetricReport report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
        {
            continue;
        }
        const std::string where = job.annotations.string() + ":" + std::to_string(line_no);
        try
        {
            const json entry = json::parse(line);
            const fs::path attention_path = resolve(base, entry.at("attention_path").get<std::string>());
            std::vector<BoundingBox> boxes;
            for (const auto& b : entry.at("boxes"))
            {
                boxes.push_back(parse_box(b));
            }
            ScoreMatrix raw = read_attention_map(attention_path);
            Eigen::Index rows = raw.rows();
            Eigen::Index cols = raw.cols();
            if (entry.contains("image_path"))
            {
                const RgbImage image = read_image(resolve(base, entry.at("image_path").get<std::string>()));
                rows = image.height();
                cols = image.width();
            }
            const ScoreMatrix scores = prepare_attention(raw, rows, cols, ResizePolicy{}, job.map);
            SampleMetrics sample;
            sample.id = entry.value("id", entry.value("image_path", attention_path.generic_string()));
            sample.pointing_hit = pointing_game(scores, boxes);
            sample.proportion = proportion(scores, boxes);
            sample.expansion = expansion_stats(boxes, build_warp(scores));
            report.samples.push_back(std::move(sample));
        }
        catch (const std::exception& e)
        {
            log_warning(where + ": skipped (" + e.what() + ")");
            ++report.skipped_lines;
        }
    }
    report.corpus = summarize(report.samples);
    try
    {
        ensure_dir(job.out_dir);
        write_file_atomic(job.out_dir / "metrics.json", dump(metric_report_to_json(report)));
        write_file_atomic(job.out_dir / "metrics.txt", metric_summary_text(report));
    }
    catch (const std::exception& e)
    {
        log_error(e.what());
        return kHardFailure;
    }
    std::cout << metric_summary_text(report);
    if (report.skipped_lines == 0)
    {
        return kSuccess;
    }
    return report.samples.empty() ? kHardFailure : kPartialFailure;
}

int cmd_export_targets(const ExportJob& job)
{
    if (job.attentions.empty())
    {
        log_error("export-targets needs at least one --attention");
        return kHardFailure;
    }
    ensure_dir(job.out_dir);
    std::atomic<std::size_t> failures{0};
    parallel_for(job.attentions.size(), job.jobs, [&](std::size_t k) {
        const fs::path& path = job.attentions[k];
        try
        {
            json targets = marginal_targets_to_json(read_attention_map(path));
            targets["source"] = file_record(path);
            write_file_atomic(job.out_dir / (path.stem().string() + "_targets.json"), dump(targets));
        }
        catch (const std::exception& e)
        {
            ++failures;
            log_error(path.string() + ": " + e.what());
        }
    });
    return batch_exit_code(failures.load(), job.attentions.size());
}

int cmd_aggregate(const AggregateJob& job)
{
    try
    {
        const auto raw = read_raw_tensor(job.raw, job.sidecar.value_or(sidecar_path_for(job.raw)));
        std::vector<int> layers = job.layers;
        if (job.preset)
        {
            const auto preset = find_layer_preset(*job.preset);
            if (!preset)
            {
                throw std::invalid_argument("unknown preset '" + *job.preset + "'");
            }
            layers.push_back(preset->layer);
        }
        const Matrix<float> grid = aggregate(raw, layers);
        Matrix<float> out = grid;
        if (job.height || job.width)
        {
            const Eigen::Index h = job.height.value_or(grid.rows());
            const Eigen::Index w = job.width.value_or(grid.cols());
            out = postprocess(grid, {h, w, job.map.smooth_k, job.map.transform}).cast<float>();
        }
        if (job.out.has_parent_path())
        {
            ensure_dir(job.out.parent_path());
        }
        write_atw1(job.out, out);
        return kSuccess;
    }
    catch (const std::exception& e)
    {
        log_error(job.raw.string() + ": " + e.what());
        return kHardFailure;
    }
}

std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::vector<fs::path> configs;
    for (auto it = args.begin(); it != args.end();)
    {
        if (*it == "--config" && it + 1 != args.end())
        {
            configs.emplace_back(*(it + 1));
            it = args.erase(it, it + 2);
        }
        else if (it->rfind("--config=", 0) == 0)
        {
            configs.emplace_back(it->substr(9));
            it = args.erase(it);
        }
        else
        {
            ++it;
        }
    }
    if (configs.empty())
    {
        return args;
    }
    static const std::vector<std::string> kSubcommands = {"warp", "chain", "metrics", "export-targets", "aggregate"};
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) {
        return std::find(kSubcommands.begin(), kSubcommands.end(), a) != kSubcommands.end();
    });
    if (sub == args.end())
    {
        throw std::invalid_argument("--config requires a subcommand");
    }
    const std::string sub_name = *sub;

    json merged = json::object();
    for (const auto& path : configs)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw std::invalid_argument("cannot open config " + path.string());
        }
        json j;
        try
        {
            j = json::parse(in);
        }
        catch (const json::exception& e)
        {
            throw std::invalid_argument("config " + path.string() + ": " + e.what());
        }
        if (!j.is_object())
        {
            throw std::invalid_argument("config " + path.string() + ": expected a JSON object");
        }
        for (const auto& [key, value] : j.items())
        {
            if (!value.is_object())
            {
                merged[key] = value;
            }
        }
        if (j.contains(sub_name) && j.at(sub_name).is_object())
        {
            for (const auto& [key, value] : j.at(sub_name).items())
            {
                merged[key] = value;
            }
        }
        for (const auto& other : kSubcommands)
        {
            merged.erase(other);
        }
    }

    auto given = [&](const std::string& flag) {
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    std::vector<std::string> injected;
    for (const auto& [key, value] : merged.items())
    {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (given(flag) || (flag == "--out-dir" && std::getenv(kOutputDirEnv) != nullptr))
        {
            continue;
        }
        auto token = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array())
        {
            for (const auto& v : value)
            {
                injected.push_back(flag);
                injected.push_back(token(v));
            }
        }
        else if (value.is_boolean())
        {
            if (value.get<bool>())
            {
                injected.push_back(flag);
            }
        }
        else if (!value.is_null())
        {
            injected.push_back(flag);
            injected.push_back(token(value));
        }
    }
    args.insert(std::find(args.begin(), args.end(), sub_name) + 1, injected.begin(), injected.end());
    return args;
}

namespace
{
struct SharedFlags
{
    std::string transform = "identity";
    int smooth_k = 3;
    std::string resize;
    std::string resize_policy = "stretch";
};

void add_map_flags(CLI::App* app, SharedFlags& flags)
{
    app->add_option("--transform", flags.transform, "Sharpness transform: sqrt, identity, square, cube")
        ->check(CLI::IsMember({"sqrt", "identity", "square", "cube"}));
    app->add_option("--smooth-k", flags.smooth_k, "Mean-filter size applied to token-grid maps (odd)")
        ->check(CLI::PositiveNumber);
}

void add_resize_flags(CLI::App* app, SharedFlags& flags)
{
    app->add_option("--resize", flags.resize, "Resize inputs to N (square) or WxH before warping");
    app->add_option("--resize-policy", flags.resize_policy, "stretch or pad (long side + centered padding)")
        ->check(CLI::IsMember({"stretch", "pad"}));
}

MapOptions map_options(const SharedFlags& flags)
{
    if (flags.smooth_k % 2 == 0)
    {
        throw CLI::ValidationError("--smooth-k", "must be odd");
    }
    return {parse_transform(flags.transform), flags.smooth_k};
}

CLI::Option* add_out_dir(CLI::App* app, fs::path& out_dir)
{
    return app->add_option("--out-dir", out_dir, "Output directory")->envname(kOutputDirEnv);
}
}  // namespace

int run(std::vector<std::string> args)
{
    CLI::App app{"Attention-guided rectilinear image warping", "attwarp"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    std::string config_note;
    app.add_option("--config", config_note, "JSON file whose keys mirror the subcommand flags");

    SharedFlags warp_flags;
    WarpJob warp;
    auto* warp_cmd = app.add_subcommand("warp", "Warp images by their attention maps");
    warp_cmd->add_option("--image", warp.images, "Input image (PNG/JPEG); repeat for a batch")->required();
    warp_cmd->add_option("--attention", warp.attentions, "Attention map (ATW1/PNG), one per image")->required();
    add_map_flags(warp_cmd, warp_flags);
    add_resize_flags(warp_cmd, warp_flags);
    add_out_dir(warp_cmd, warp.out_dir);
    warp_cmd->add_option("--jobs", warp.jobs, "Parallel workers (0 = all cores)");

    SharedFlags chain_flags;
    ChainJob chain;
    std::string extractor;
    auto* chain_cmd = app.add_subcommand("chain", "Iterative warping with KL-based stopping");
    chain_cmd->add_option("--image", chain.image, "Input image")->required();
    chain_cmd->add_option("--attention", chain.attentions, "Attention map for depth 0, 1, ... in order");
    chain_cmd->add_option("--extractor-cmd", extractor,
                          "Command producing attention; called with --image <png> --out <atw1>");
    chain_cmd->add_option("--kl-epsilon", chain.chain.kl_epsilon, "KL stopping threshold")->check(CLI::NonNegativeNumber);
    chain_cmd->add_option("--max-iterations", chain.chain.max_iterations, "Maximum warps")->check(CLI::PositiveNumber);
    add_map_flags(chain_cmd, chain_flags);
    add_resize_flags(chain_cmd, chain_flags);
    add_out_dir(chain_cmd, chain.out_dir);

    SharedFlags metrics_flags;
    MetricsJob metrics;
    auto* metrics_cmd = app.add_subcommand("metrics", "Pointing game, proportion and expansion metrics");
    metrics_cmd->add_option("--annotations", metrics.annotations, "JSON-lines annotation file")->required();
    add_map_flags(metrics_cmd, metrics_flags);
    add_out_dir(metrics_cmd, metrics.out_dir);

    ExportJob export_job;
    auto* export_cmd = app.add_subcommand("export-targets", "Write unit-mass marginals of attention maps");
    export_cmd->add_option("--attention", export_job.attentions, "Attention map; repeat for a batch")->required();
    add_out_dir(export_cmd, export_job.out_dir);
    export_cmd->add_option("--jobs", export_job.jobs, "Parallel workers (0 = all cores)");

    SharedFlags aggregate_flags;
    AggregateJob aggregate_job;
    std::string sidecar;
    std::string preset;
    Eigen::Index height = 0;
    Eigen::Index width = 0;
    auto* aggregate_cmd = app.add_subcommand("aggregate", "Raw attention stack -> score matrix (ATW1)");
    aggregate_cmd->add_option("--raw", aggregate_job.raw, "ATW1 attention stack")->required();
    aggregate_cmd->add_option("--sidecar", sidecar, "Sidecar JSON (default: stack path with .json)");
    aggregate_cmd->add_option("--layer", aggregate_job.layers, "Model layer index; repeatable");
    aggregate_cmd->add_option("--preset", preset, "Layer preset: llava (20) or qwen (16)")
        ->check(CLI::IsMember({"llava", "qwen"}));
    aggregate_cmd->add_option("--height", height, "Upsample to this many rows")->check(CLI::PositiveNumber);
    aggregate_cmd->add_option("--width", width, "Upsample to this many columns")->check(CLI::PositiveNumber);
    add_map_flags(aggregate_cmd, aggregate_flags);
    aggregate_cmd->add_option("--out", aggregate_job.out, "Output ATW1 path")->required();

    try
    {
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);

        if (*warp_cmd)
        {
            warp.map = map_options(warp_flags);
            warp.resize = parse_resize(warp_flags.resize, warp_flags.resize_policy);
            return cmd_warp(warp);
        }
        if (*chain_cmd)
        {
            chain.map = map_options(chain_flags);
            chain.resize = parse_resize(chain_flags.resize, chain_flags.resize_policy);
            if (!extractor.empty())
            {
                chain.extractor_cmd = extractor;
            }
            return cmd_chain(chain);
        }
        if (*metrics_cmd)
        {
            metrics.map = map_options(metrics_flags);
            return cmd_metrics(metrics);
        }
        if (*export_cmd)
        {
            return cmd_export_targets(export_job);
        }
        if (*aggregate_cmd)
        {
            aggregate_job.map = map_options(aggregate_flags);
            if (!sidecar.empty())
            {
                aggregate_job.sidecar = sidecar;
            }
            if (!preset.empty())
            {
                aggregate_job.preset = preset;
            }
            if (height > 0)
            {
                aggregate_job.height = height;
            }
            if (width > 0)
            {
                aggregate_job.width = width;
            }
            if (aggregate_job.layers.empty() && !aggregate_job.preset)
            {
                throw CLI::ValidationError("aggregate", "give --layer or --preset");
            }
            return cmd_aggregate(aggregate_job);
        }
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kSuccess : kHardFailure;
    }
    catch (const std::exception& e)
    {
        log_error(e.what());
        return kHardFailure;
    }
    return kHardFailure;
}

}  // namespace attwarp::cli
