#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "archmap/arch_fit.hpp"
#include "archmap/backend.hpp"
#include "archmap/render.hpp"
#include "archmap/vlm_infer.hpp"

namespace archmap {

struct IoConfig {
    std::filesystem::path input_dir;
    std::filesystem::path output_dir = "archmap_out";
    std::filesystem::path ground_truth_dir; // empty: next to the meshes
    std::filesystem::path ontology = default_ontology_path();
    bool write_images = true;
    bool write_flattened = false;
};

struct FlattenConfig {
    int sample_count = 4096;
    double radial_quantile = 0.95;
};

struct BackendConfig {
    std::string kind = "mock"; // mock | http
    std::string url;
    std::string model_name = "archmap-mock";
    InferenceMode mode = InferenceMode::NonThinking;
    int max_concurrency = 1;
    double timeout_s = 60.0;
    std::string api_key_env = "ARCHMAP_API_KEY";
    std::string thinking_field;
    RetryPolicy retry;
};

/// One row of the ablation grid.
struct Variant {
    RenderMode render_mode = RenderMode::SSP;
    bool flatten_enabled = true;
    bool dkb_enabled = true;

    /// "Full (SSP + Flatten + DKB)", "No DKB + UVP", ...
    std::string name() const;
    /// Directory-safe name: "full", "no-dkb_uvp", ...
    std::string slug() const;
    bool operator==(const Variant &) const = default;
};

/// The eight rows, in the reporting order.
std::array<Variant, 8> ablation_variants();

struct MockConfig {
    std::uint64_t seed = 7;
    int corrupt_count = 0;
    CorruptionKind corrupt_kind = CorruptionKind::Hallucination;
};

struct PipelineConfig {
    IoConfig io;
    FitConfig arch_fit;
    FlattenConfig flatten;
    RenderConfig render;
    BackendConfig backend;
    Variant variant;
    MockConfig mock;

    /// Throws InvalidConfig for out-of-range values or unresolvable paths.
    void validate() const;
};

/// INI text with sections [io] [arch_fit] [flatten] [render] [backend] [eval]
/// [variant] [mock]. Unknown keys are rejected; relative paths resolve
/// against `base_dir`.
PipelineConfig parse_config(const std::string &ini_text, const std::filesystem::path &base_dir = {});
PipelineConfig load_config(const std::filesystem::path &path);

/// Settings that influence a case's outputs, for fingerprinting.
nlohmann::ordered_json output_relevant_settings(const PipelineConfig &config);

} // namespace archmap
