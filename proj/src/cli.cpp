#include "archmap/cli.hpp"

#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include <fmt/format.h>

#include "archmap/pipeline.hpp"
#include "archmap/synth.hpp"

namespace archmap {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config_path;
    std::string ontology;
    std::string arch;
    std::string render_mode;
    bool no_flatten = false;
    bool no_dkb = false;
    std::string mode;
    std::string backend;
    std::string url;
    std::string model;
    std::optional<std::uint64_t> seed;
    std::optional<int> corrupt_count;
    std::string corrupt_kind;
    std::optional<int> concurrency;
    std::string output;
    std::string gt_dir;
};

PipelineConfig resolve_config(const Overrides &o) {
    PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
    if (!o.ontology.empty()) c.io.ontology = o.ontology;
    if (!o.render_mode.empty()) c.variant.render_mode = parse_render_mode(o.render_mode);
    if (o.no_flatten) c.variant.flatten_enabled = false;
    if (o.no_dkb) c.variant.dkb_enabled = false;
    if (!o.mode.empty()) c.backend.mode = parse_inference_mode(o.mode);
    if (!o.backend.empty()) c.backend.kind = o.backend;
    if (!o.url.empty()) c.backend.url = o.url;
    if (!o.model.empty()) c.backend.model_name = o.model;
    if (o.seed) c.mock.seed = *o.seed;
    if (o.corrupt_count) c.mock.corrupt_count = *o.corrupt_count;
    if (!o.corrupt_kind.empty()) c.mock.corrupt_kind = parse_corruption_kind(o.corrupt_kind);
    if (o.concurrency) c.backend.max_concurrency = *o.concurrency;
    if (!o.output.empty()) c.io.output_dir = o.output;
    if (!o.gt_dir.empty()) c.io.ground_truth_dir = o.gt_dir;
    c.validate();
    return c;
}

std::optional<ArchSide> arch_override(const Overrides &o) {
    if (o.arch.empty()) return std::nullopt;
    return parse_arch_side(o.arch);
}

void add_common(CLI::App *cmd, Overrides &o) {
    cmd->add_option("-c,--config", o.config_path, "INI configuration file");
    cmd->add_option("--ontology", o.ontology, "Ontology YAML file");
}

void add_variant(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--mode,--render-mode", o.render_mode, "Render mode: ssp | uvp");
    cmd->add_flag("--no-flatten", o.no_flatten, "Render the fitted-frame mesh without flattening");
}

void add_inference(CLI::App *cmd, Overrides &o) {
    cmd->add_flag("--no-dkb", o.no_dkb, "Minimal prompt, syntax-only validation");
    cmd->add_option("--infer-mode", o.mode, "thinking | non-thinking");
    cmd->add_option("--backend", o.backend, "mock | http");
    cmd->add_option("--url", o.url, "Endpoint of the http backend");
    cmd->add_option("--model", o.model, "Model name sent to the backend");
    cmd->add_option("--seed", o.seed, "Mock backend seed");
    cmd->add_option("--corrupt-count", o.corrupt_count, "Mock: corrupt the first k cases");
    cmd->add_option("--corrupt-kind", o.corrupt_kind, "Mock: hallucination | invalid_json | fenced");
    cmd->add_option("-j,--concurrency", o.concurrency, "Cases run concurrently");
    cmd->add_option("--arch", o.arch, "Arch for every case: upper | lower");
}

std::string case_stem(const fs::path &mesh, const std::optional<ArchSide> &arch, ArchSide &side) {
    const std::string stem = mesh.stem().string();
    const auto split = split_case_stem(stem);
    if (arch) {
        side = *arch;
        return split ? split->first : stem;
    }
    if (!split)
        throw InvalidConfig(fmt::format("cannot infer the arch of '{}'; use --arch", mesh.filename().string()));
    side = split->second;
    return split->first;
}

int report_batch(const std::vector<CaseRecord> &records, const DentalOntology &ontology, std::ostream &out,
                 std::ostream &err) {
    std::size_t ok = 0, valid = 0, halluc = 0;
    for (const auto &r : records) {
        if (!r.ok) {
            err << fmt::format("{}: failed: {}: {}\n", r.input.key(), r.error_kind, r.error_message);
            continue;
        }
        ++ok;
        if (r.outcome.json_valid) {
            ++valid;
            halluc += !out_of_ontology_labels(*r.outcome.report, ontology).empty();
        }
    }
    out << fmt::format("cases: {}  succeeded: {}  json_valid: {}  hallucinated: {}\n", records.size(), ok, valid,
                       halluc);
    return ok == 0 ? 1 : 0;
}

int cmd_flatten(const std::string &input, const std::string &output, const Overrides &o, std::ostream &out) {
    const PipelineConfig c = resolve_config(o);
    const TriangleMesh mesh = read_stl(input);
    const Point2Set clipped = radial_preclip(occlusal_projection(mesh), c.flatten.radial_quantile);
    const ArchCurve curve = estimate_arch(clipped, c.arch_fit);
    const Vertices fitted = to_fitted_frame(mesh.vertices(), curve);
    const FlattenedMesh flat = flatten_mesh(mesh, curve, default_sampling(fitted, curve, c.flatten.sample_count));
    write_binary_stl(output, flat.flat_vertices, flat.faces);
    out << fmt::format("theta_star: {:.6f}\na: {:.9g}\nb: {:.9g}\nc: {:.9g}\nrms_residual: {:.9g}\n"
                       "inlier_fraction: {:.6f}\n",
                       curve.theta_star, curve.a, curve.b, curve.c, curve.rms_residual, curve.inlier_fraction);
    return 0;
}

int cmd_render(const std::string &input, const std::string &outdir, const Overrides &o, std::ostream &out) {
    const PipelineConfig c = resolve_config(o);
    ArchSide side = ArchSide::Maxillary;
    const std::string case_id = case_stem(input, arch_override(o), side);
    const GeometryResult geo = run_geometry(input, side, c);
    fs::create_directories(outdir);
    for (std::size_t i = 0; i < 3; ++i) {
        const fs::path path = fs::path(outdir) / fmt::format("{}_{}_{}_{}.png", case_id, to_string(side),
                                                             to_string(static_cast<ViewName>(i)),
                                                             to_string(c.variant.render_mode));
        write_png(path, geo.views.views[i]);
        out << path.string() << '\n';
    }
    return 0;
}

int cmd_infer(const std::string &dir, const Overrides &o, std::ostream &out, std::ostream &err) {
    const PipelineConfig c = resolve_config(o);
    const DentalOntology ontology = load_ontology(c.io.ontology);
    const auto cases = discover_cases(dir, arch_override(o), c.io.ground_truth_dir);
    if (cases.empty()) {
        err << "no cases\n";
        return 1;
    }
    auto backend = make_backend(c, ontology, cases);
    const auto records = run_batch(cases, c, ontology, *backend, c.io.output_dir);
    return report_batch(records, ontology, out, err);
}

std::string variant_name_of(const fs::path &reports_dir) {
    for (const auto &entry : fs::directory_iterator(reports_dir)) {
        if (!entry.path().filename().string().ends_with(".report.json")) continue;
        std::ifstream in(entry.path());
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (!j.is_discarded() && j.contains("metadata") && j["metadata"].contains("variant"))
            return j["metadata"]["variant"].value("name", "");
    }
    return Variant{}.name();
}

int cmd_eval(const std::string &reports, const std::string &gt, const std::string &outdir, const Overrides &o,
             std::ostream &out, std::ostream &err) {
    const PipelineConfig c = resolve_config(o);
    const DentalOntology ontology = load_ontology(c.io.ontology);
    std::vector<std::string> unmatched;
    const auto metrics = evaluate_directory(reports, gt, ontology, unmatched);
    if (!unmatched.empty()) {
        err << fmt::format("{} report(s) without ground truth:\n", unmatched.size());
        for (const auto &u : unmatched) err << "  " << u << '\n';
        return 1;
    }
    if (metrics.empty()) {
        err << "no cases\n";
        return 1;
    }
    write_metric_files(outdir, metrics, variant_name_of(reports));
    const auto all = aggregate(metrics, "all");
    out << fmt::format("evaluated {} records; metrics written to {}\n", metrics.size(), outdir);
    for (std::size_t k = 0; k < kMetricNames.size(); ++k)
        if (all.metrics[k])
            out << fmt::format("  {:<9} {:10.3f} +- {:.3f}\n", kMetricNames[k], all.metrics[k]->mean,
                               all.metrics[k]->std);
    return 0;
}

int cmd_pipeline(const std::string &dir, const Overrides &o, std::ostream &out, std::ostream &err) {
    const PipelineConfig c = resolve_config(o);
    const DentalOntology ontology = load_ontology(c.io.ontology);
    const auto cases = discover_cases(dir, arch_override(o), c.io.ground_truth_dir);
    if (cases.empty()) {
        err << "no cases\n";
        return 1;
    }
    auto backend = make_backend(c, ontology, cases);
    const auto records = run_batch(cases, c, ontology, *backend, c.io.output_dir);
    const int status = report_batch(records, ontology, out, err);
    const auto metrics = evaluate_records(records, ontology);
    if (!metrics.empty()) {
        write_metric_files(c.io.output_dir, metrics, c.variant.name());
        const auto all = aggregate(metrics, "all");
        for (std::size_t k = 0; k < kMetricNames.size(); ++k)
            if (all.metrics[k])
                out << fmt::format("  {:<9} {:10.3f} +- {:.3f}\n", kMetricNames[k], all.metrics[k]->mean,
                                   all.metrics[k]->std);
    }
    return status;
}

int cmd_ablate(const std::string &dir, const Overrides &o, std::ostream &out, std::ostream &err) {
    const PipelineConfig c = resolve_config(o);
    const DentalOntology ontology = load_ontology(c.io.ontology);
    const auto cases = discover_cases(dir, arch_override(o), c.io.ground_truth_dir);
    if (cases.empty()) {
        err << "no cases\n";
        return 1;
    }
    const auto rows = run_ablation_grid(cases, c, ontology, c.io.output_dir);
    out << fmt::format("{:<36} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>8}\n", "variant", "AE", "RE", "Acc", "MacroF1",
                       "StageAcc", "JsonValid", "Halluc");
    auto cell = [](const std::optional<Stat> &s) { return s ? fmt::format("{:8.3f}", s->mean) : std::string(8, ' '); };
    for (const auto &row : rows) {
        const auto &m = row.summary.metrics;
        out << fmt::format("{:<36} {} {} {} {} {} {:>9} {}\n", row.variant.name(), cell(m[0]), cell(m[1]), cell(m[2]),
                           cell(m[5]), cell(m[6]), cell(m[7]), cell(m[8]));
    }
    out << fmt::format("wrote {}\n", (fs::path(c.io.output_dir) / "ablation_summary.csv").string());
    return 0;
}

int cmd_synth(const std::string &dir, int count, std::uint64_t seed, double max_theta, const Overrides &o,
              std::ostream &out) {
    const DentalOntology ontology = load_ontology(o.ontology.empty() ? default_ontology_path() : fs::path(o.ontology));
    SynthDatasetOptions options;
    options.count = count;
    options.seed = seed;
    options.max_theta_deg = max_theta;
    write_synthetic_dataset(dir, options, ontology);
    out << fmt::format("wrote {} synthetic cases to {}\n", count, dir);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Dental arch standardization, rendering and structured inference"};
    app.require_subcommand(1);
    Overrides o;
    std::string input, output, dir, reports, gt;
    int count = 20;
    std::uint64_t synth_seed = 1;
    double max_theta = 30.0;

    auto *flatten = app.add_subcommand("flatten", "Fit the arch curve and write the flattened mesh");
    flatten->add_option("input", input, "Input STL")->required();
    flatten->add_option("output", output, "Output STL")->required();
    add_common(flatten, o);

    auto *render = app.add_subcommand("render", "Render front/back/bottom views to PNG");
    render->add_option("input", input, "Input STL")->required();
    render->add_option("outdir", output, "Output directory")->required();
    render->add_option("--arch", o.arch, "upper | lower (default: from the file name)");
    add_common(render, o);
    add_variant(render, o);

    auto *infer_cmd = app.add_subcommand("infer", "Run inference on every mesh of a case directory");
    infer_cmd->add_option("dir", dir, "Case directory")->required();
    infer_cmd->add_option("-o,--output", o.output, "Output directory");
    add_common(infer_cmd, o);
    add_variant(infer_cmd, o);
    add_inference(infer_cmd, o);

    auto *eval = app.add_subcommand("eval", "Score report files against ground truth");
    eval->add_option("reports", reports, "Directory of <case>_<arch>.report.json")->required();
    eval->add_option("ground_truth", gt, "Directory of <case>_<arch>.gt.json")->required();
    eval->add_option("outdir", output, "Output directory")->required();
    add_common(eval, o);

    auto *ablate = app.add_subcommand("ablate", "Run the eight-variant ablation grid");
    ablate->add_option("dir", dir, "Dataset directory")->required();
    ablate->add_option("-o,--output", o.output, "Output directory");
    add_common(ablate, o);
    add_inference(ablate, o);

    auto *pipeline = app.add_subcommand("pipeline", "Infer and evaluate a dataset end to end");
    pipeline->add_option("dir", dir, "Dataset directory")->required();
    pipeline->add_option("-o,--output", o.output, "Output directory");
    pipeline->add_option("--gt", o.gt_dir, "Ground-truth directory (default: dataset directory)");
    add_common(pipeline, o);
    add_variant(pipeline, o);
    add_inference(pipeline, o);

    auto *synth = app.add_subcommand("synth", "Write a synthetic dataset with ground truth");
    synth->add_option("dir", dir, "Output directory")->required();
    synth->add_option("-n,--count", count, "Number of cases");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--max-theta", max_theta, "Largest construction angle, degrees");
    synth->add_option("--ontology", o.ontology, "Ontology YAML file");

    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err);
    }

    try {
        if (*flatten) return cmd_flatten(input, output, o, out);
        if (*render) return cmd_render(input, output, o, out);
        if (*infer_cmd) return cmd_infer(dir, o, out, err);
        if (*eval) return cmd_eval(reports, gt, output, o, out, err);
        if (*ablate) return cmd_ablate(dir, o, out, err);
        if (*pipeline) return cmd_pipeline(dir, o, out, err);
        if (*synth) return cmd_synth(dir, count, synth_seed, max_theta, o, out);
    } catch (const FileNotFound &e) {
        err << "error: file not found: " << e.what() << '\n';
        return 2;
    } catch (const Error &e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

} // namespace archmap
