#include "archmap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

namespace archmap {

std::string Variant::name() const {
    if (render_mode == RenderMode::SSP && flatten_enabled && dkb_enabled) return "Full (SSP + Flatten + DKB)";
    std::vector<std::string> parts;
    if (!dkb_enabled) parts.emplace_back("No DKB");
    if (render_mode == RenderMode::UVP) parts.emplace_back("UVP");
    if (!flatten_enabled) parts.emplace_back("No-Flatten");
    return fmt::format("{}", fmt::join(parts, " + "));
}

std::string Variant::slug() const {
    if (render_mode == RenderMode::SSP && flatten_enabled && dkb_enabled) return "full";
    std::vector<std::string> parts;
    if (!dkb_enabled) parts.emplace_back("no-dkb");
    if (render_mode == RenderMode::UVP) parts.emplace_back("uvp");
    if (!flatten_enabled) parts.emplace_back("no-flatten");
    return fmt::format("{}", fmt::join(parts, "_"));
}

std::array<Variant, 8> ablation_variants() {
    using RM = RenderMode;
    return {{
        {RM::SSP, true, true},
        {RM::SSP, true, false},
        {RM::UVP, true, true},
        {RM::SSP, false, true},
        {RM::UVP, true, false},
        {RM::SSP, false, false},
        {RM::UVP, false, true},
        {RM::UVP, false, false},
    }};
}

void PipelineConfig::validate() const {
    arch_fit.validate();
    render.validate();
    if (flatten.sample_count < 2) throw InvalidConfig("flatten.sample_count must be >= 2");
    if (!(flatten.radial_quantile > 0.5 && flatten.radial_quantile <= 1.0))
        throw InvalidConfig("flatten.radial_quantile must lie in (0.5, 1]");
    if (backend.kind != "mock" && backend.kind != "http")
        throw InvalidConfig(fmt::format("backend.kind must be mock or http, got '{}'", backend.kind));
    if (backend.kind == "http" && backend.url.empty()) throw InvalidConfig("backend.url is required for http");
    if (backend.max_concurrency < 1) throw InvalidConfig("backend.max_concurrency must be >= 1");
    if (!(backend.timeout_s > 0.0)) throw InvalidConfig("backend.timeout_s must be > 0");
    if (backend.retry.max_attempts < 1) throw InvalidConfig("backend.max_attempts must be >= 1");
    if (mock.corrupt_count < 0) throw InvalidConfig("mock.corrupt_count must be >= 0");
    if (!std::filesystem::exists(io.ontology))
        throw InvalidConfig(fmt::format("ontology file not found: {}", io.ontology.string()));
    if (!io.input_dir.empty() && !std::filesystem::is_directory(io.input_dir))
        throw InvalidConfig(fmt::format("input directory not found: {}", io.input_dir.string()));
    if (!io.ground_truth_dir.empty() && !std::filesystem::is_directory(io.ground_truth_dir))
        throw InvalidConfig(fmt::format("ground-truth directory not found: {}", io.ground_truth_dir.string()));
}

namespace {

namespace pt = boost::property_tree;

bool parse_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidConfig(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

template <typename T>
T parse_number(const std::string &key, const std::string &v) {
    std::istringstream in(v);
    T out{};
    in >> out;
    if (in.fail() || !in.eof()) throw InvalidConfig(fmt::format("{}: expected a number, got '{}'", key, v));
    return out;
}

Rgb8 parse_rgb(const std::string &key, const std::string &v) {
    std::istringstream in(v);
    int r = 0, g = 0, b = 0;
    char c1 = 0, c2 = 0;
    in >> r >> c1 >> g >> c2 >> b;
    if (in.fail() || c1 != ',' || c2 != ',' || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255)
        throw InvalidConfig(fmt::format("{}: expected r,g,b in 0..255, got '{}'", key, v));
    return Rgb8(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b));
}

Eigen::Vector3d parse_vec3(const std::string &key, const std::string &v) {
    std::istringstream in(v);
    double x = 0, y = 0, z = 0;
    char c1 = 0, c2 = 0;
    in >> x >> c1 >> y >> c2 >> z;
    if (in.fail() || c1 != ',' || c2 != ',') throw InvalidConfig(fmt::format("{}: expected x,y,z, got '{}'", key, v));
    return {x, y, z};
}

} // namespace

PipelineConfig parse_config(const std::string &ini_text, const std::filesystem::path &base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error &e) {
        throw InvalidConfig(fmt::format("config: {}", e.what()));
    }
    PipelineConfig c;
    auto path = [&](const std::string &v) {
        std::filesystem::path p(v);
        return (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
    };
    for (const auto &[section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw InvalidConfig(fmt::format("config: key '{}' outside any section", section));
        for (const auto &[key, node] : body) {
            const std::string v = node.data();
            const std::string full = section + "." + key;
            bool known = true;
            if (section == "io") {
                if (key == "input_dir") c.io.input_dir = path(v);
                else if (key == "output_dir") c.io.output_dir = path(v);
                else if (key == "ontology") c.io.ontology = path(v);
                else if (key == "write_images") c.io.write_images = parse_bool(full, v);
                else if (key == "write_flattened") c.io.write_flattened = parse_bool(full, v);
                else known = false;
            } else if (section == "arch_fit") {
                if (key == "coarse_step") c.arch_fit.coarse_step = parse_number<double>(full, v);
                else if (key == "refine_half_window") c.arch_fit.refine_half_window = parse_number<double>(full, v);
                else if (key == "refine_iterations") c.arch_fit.refine_iterations = parse_number<int>(full, v);
                else if (key == "clip_quantile") c.arch_fit.clip_quantile = parse_number<double>(full, v);
                else known = false;
            } else if (section == "flatten") {
                if (key == "sample_count") c.flatten.sample_count = parse_number<int>(full, v);
                else if (key == "radial_quantile") c.flatten.radial_quantile = parse_number<double>(full, v);
                else known = false;
            } else if (section == "render") {
                auto &r = c.render;
                if (key == "width") r.width = parse_number<int>(full, v);
                else if (key == "height") r.height = parse_number<int>(full, v);
                else if (key == "background") r.background = parse_rgb(full, v);
                else if (key == "light_direction") r.light_direction = parse_vec3(full, v);
                else if (key == "ambient") r.ambient = parse_number<double>(full, v);
                else if (key == "diffuse") r.diffuse = parse_number<double>(full, v);
                else if (key == "specular") r.specular = parse_number<double>(full, v);
                else if (key == "shininess") r.shininess = parse_number<double>(full, v);
                else if (key == "point_radius") r.point_radius = parse_number<double>(full, v);
                else if (key == "crop_ratio") r.crop_ratio = parse_number<double>(full, v);
                else known = false;
            } else if (section == "backend") {
                auto &b = c.backend;
                if (key == "kind") b.kind = v;
                else if (key == "url") b.url = v;
                else if (key == "model_name") b.model_name = v;
                else if (key == "mode") b.mode = parse_inference_mode(v);
                else if (key == "max_concurrency") b.max_concurrency = parse_number<int>(full, v);
                else if (key == "timeout_s") b.timeout_s = parse_number<double>(full, v);
                else if (key == "api_key_env") b.api_key_env = v;
                else if (key == "thinking_field") b.thinking_field = v;
                else if (key == "max_attempts") b.retry.max_attempts = parse_number<int>(full, v);
                else if (key == "backoff_s") b.retry.initial_backoff_s = parse_number<double>(full, v);
                else known = false;
            } else if (section == "variant") {
                if (key == "render_mode") c.variant.render_mode = parse_render_mode(v);
                else if (key == "flatten_enabled") c.variant.flatten_enabled = parse_bool(full, v);
                else if (key == "dkb_enabled") c.variant.dkb_enabled = parse_bool(full, v);
                else known = false;
            } else if (section == "eval") {
                if (key == "ground_truth_dir") c.io.ground_truth_dir = path(v);
                else known = false;
            } else if (section == "mock") {
                if (key == "seed") c.mock.seed = parse_number<std::uint64_t>(full, v);
                else if (key == "corrupt_count") c.mock.corrupt_count = parse_number<int>(full, v);
                else if (key == "corrupt_kind") c.mock.corrupt_kind = parse_corruption_kind(v);
                else known = false;
            } else {
                throw InvalidConfig(fmt::format("config: unknown section [{}]", section));
            }
            if (!known) throw InvalidConfig(fmt::format("config: unknown key '{}'", full));
        }
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(fmt::format("file not found: {}", path.string()));
    std::stringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

nlohmann::ordered_json output_relevant_settings(const PipelineConfig &c) {
    nlohmann::ordered_json j;
    j["arch_fit"] = {{"coarse_step", c.arch_fit.coarse_step},
                     {"refine_half_window", c.arch_fit.refine_half_window},
                     {"refine_iterations", c.arch_fit.refine_iterations},
                     {"clip_quantile", c.arch_fit.clip_quantile}};
    j["flatten"] = {{"sample_count", c.flatten.sample_count},
                    {"radial_quantile", c.flatten.radial_quantile}};
    const auto &r = c.render;
    j["render"] = {{"width", r.width},
                   {"height", r.height},
                   {"background", {r.background[0], r.background[1], r.background[2]}},
                   {"base_color", {r.base_color.x(), r.base_color.y(), r.base_color.z()}},
                   {"light_direction", r.light_direction ? nlohmann::ordered_json{r.light_direction->x(),
                                                                                  r.light_direction->y(),
                                                                                  r.light_direction->z()}
                                                         : nlohmann::ordered_json(nullptr)},
                   {"ambient", r.ambient},
                   {"diffuse", r.diffuse},
                   {"specular", r.specular},
                   {"shininess", r.shininess},
                   {"point_radius", r.point_radius},
                   {"crop_ratio", r.crop_ratio}};
    j["backend"] = {{"kind", c.backend.kind},
                    {"url", c.backend.url},
                    {"model_name", c.backend.model_name},
                    {"mode", to_string(c.backend.mode)},
                    {"thinking_field", c.backend.thinking_field}};
    j["variant"] = {{"render_mode", to_string(c.variant.render_mode)},
                    {"flatten_enabled", c.variant.flatten_enabled},
                    {"dkb_enabled", c.variant.dkb_enabled}};
    if (c.backend.kind == "mock")
        j["mock"] = {{"seed", c.mock.seed},
                     {"corrupt_count", c.mock.corrupt_count},
                     {"corrupt_kind", to_string(c.mock.corrupt_kind)}};
    return j;
}

} // namespace archmap
