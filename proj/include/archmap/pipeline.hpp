#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "archmap/backend.hpp"
#include "archmap/config.hpp"
#include "archmap/dkb.hpp"
#include "archmap/eval.hpp"
#include "archmap/flatten.hpp"
#include "archmap/render.hpp"
#include "archmap/vlm_infer.hpp"

namespace archmap {

struct CaseInput {
    std::string case_id;
    ArchSide arch = ArchSide::Maxillary;
    std::filesystem::path mesh;
    std::filesystem::path ground_truth; // empty when absent

    /// "<case>_<arch>"
    std::string key() const;
};

/// Splits "<case>_upper" / "<case>_lower" file stems; nullopt otherwise.
std::optional<std::pair<std::string, ArchSide>> split_case_stem(const std::string &stem);

/// Cases of a dataset directory, sorted by key. A manifest.csv (columns
/// case_id, arch, mesh and optionally ground_truth; extra columns ignored)
/// takes precedence; otherwise every *.stl is a case, its arch taken from
/// the file-name suffix or from `arch_override`. Ground truth defaults to
/// <key>.gt.json in `gt_dir` (or next to the mesh).
std::vector<CaseInput> discover_cases(const std::filesystem::path &dir, std::optional<ArchSide> arch_override = {},
                                      const std::filesystem::path &gt_dir = {});

/// Geometry half of the pipeline: parse, preclip, fit, flatten (or only the
/// fitted-frame transform when flattening is off), render.
struct GeometryResult {
    TriangleMesh mesh;
    ArchCurve curve;
    Vertices render_vertices; // flattened (s, d, z) or fitted-frame (x', y', z)
    MultiViewSet views;
};

GeometryResult run_geometry(const std::filesystem::path &mesh_path, ArchSide side, const PipelineConfig &config);

nlohmann::ordered_json fit_diagnostics(const ArchCurve &curve);

struct CaseRecord {
    CaseInput input;
    bool ok = false;
    std::string error_kind;
    std::string error_message;
    InferenceOutcome outcome;
    nlohmann::ordered_json metadata;
    bool resumed = false; // loaded from a persisted report, not recomputed
};

/// Full per-arch run; module errors become a failed record.
CaseRecord run_case(const CaseInput &input, const PipelineConfig &config, const DentalOntology &ontology,
                    Backend &backend, const std::filesystem::path &outdir = {});

nlohmann::ordered_json to_json(const CaseRecord &record);
/// Inverse of to_json for persisted report files.
CaseRecord case_record_from_json(const nlohmann::json &value, const DentalOntology &ontology);

/// Fingerprint of everything that determines a case's outputs: the
/// output-relevant settings, the ontology and the mesh bytes.
std::string config_fingerprint(const PipelineConfig &config, const DentalOntology &ontology,
                               const CaseInput &input);

/// Backend for a configuration; the mock corrupts the first corrupt_count
/// case keys of `cases` in sorted order.
std::unique_ptr<Backend> make_backend(const PipelineConfig &config, const DentalOntology &ontology,
                                      const std::vector<CaseInput> &cases);

struct BatchOptions {
    /// Reuse a persisted report whose fingerprint matches instead of
    /// recomputing it.
    bool resume = false;
    std::function<void(const CaseRecord &)> on_record;
};

/// Runs every case (up to backend.max_concurrency at a time), writes
/// <key>.report.json per case under `outdir` and returns records in case
/// order. Never throws for a single case.
std::vector<CaseRecord> run_batch(const std::vector<CaseInput> &cases, const PipelineConfig &config,
                                  const DentalOntology &ontology, Backend &backend,
                                  const std::filesystem::path &outdir, const BatchOptions &options = {});

/// Reads <key>.gt.json for every record that has one and scores it.
std::vector<CaseMetrics> evaluate_records(const std::vector<CaseRecord> &records, const DentalOntology &ontology);

/// Loads every *.report.json in `reports_dir` and pairs it with
/// <key>.gt.json in `gt_dir`. Unmatched reports are listed in `unmatched`.
std::vector<CaseMetrics> evaluate_directory(const std::filesystem::path &reports_dir,
                                            const std::filesystem::path &gt_dir, const DentalOntology &ontology,
                                            std::vector<std::string> &unmatched);

struct AblationRow {
    Variant variant;
    MetricSummary summary; // the "all" group
    std::size_t records = 0;
};

/// Runs the eight variants over `cases`, persisting per-variant outputs
/// under outdir/ablation/<slug>/ (resumable), and writes
/// outdir/ablation_summary.csv.
std::vector<AblationRow> run_ablation_grid(const std::vector<CaseInput> &cases, const PipelineConfig &config,
                                           const DentalOntology &ontology, const std::filesystem::path &outdir);

void write_ablation_summary(const std::filesystem::path &path, const std::vector<AblationRow> &rows);

} // namespace archmap
