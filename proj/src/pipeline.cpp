#include "archmap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace archmap {

namespace fs = std::filesystem;

std::string CaseInput::key() const { return fmt::format("{}_{}", case_id, to_string(arch)); }

std::optional<std::pair<std::string, ArchSide>> split_case_stem(const std::string &stem) {
    for (ArchSide side : {ArchSide::Maxillary, ArchSide::Mandibular}) {
        const std::string suffix = "_" + to_string(side);
        if (stem.size() > suffix.size() && stem.ends_with(suffix))
            return std::pair{stem.substr(0, stem.size() - suffix.size()), side};
    }
    return std::nullopt;
}

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

fs::path default_gt(const fs::path &mesh_dir, const fs::path &gt_dir, const std::string &key) {
    return (gt_dir.empty() ? mesh_dir : gt_dir) / (key + ".gt.json");
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound(fmt::format("file not found: {}", path.string()));
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileNotFound(fmt::format("cannot open for writing: {}", path.string()));
    out << text;
}

} // namespace

std::vector<CaseInput> discover_cases(const fs::path &dir, std::optional<ArchSide> arch_override,
                                      const fs::path &gt_dir) {
    if (!fs::is_directory(dir)) throw FileNotFound(fmt::format("dataset directory not found: {}", dir.string()));
    std::vector<CaseInput> cases;
    const fs::path manifest = dir / "manifest.csv";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::string line;
        std::getline(in, line);
        const auto header = split_csv_line(line);
        auto column = [&](const std::string &name) -> std::optional<std::size_t> {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) return std::nullopt;
            return static_cast<std::size_t>(it - header.begin());
        };
        const auto c_case = column("case_id"), c_arch = column("arch"), c_mesh = column("mesh");
        const auto c_gt = column("ground_truth");
        if (!c_case || !c_mesh || (!c_arch && !arch_override))
            throw InvalidConfig("manifest.csv needs case_id, mesh and arch columns");
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
            const auto cells = split_csv_line(line);
            auto cell = [&](std::size_t i) { return i < cells.size() ? cells[i] : std::string(); };
            CaseInput c;
            c.case_id = cell(*c_case);
            c.arch = arch_override ? *arch_override : parse_arch_side(cell(*c_arch));
            c.mesh = dir / cell(*c_mesh);
            if (c_gt && !cell(*c_gt).empty()) c.ground_truth = (gt_dir.empty() ? dir : gt_dir) / cell(*c_gt);
            else c.ground_truth = default_gt(dir, gt_dir, c.key());
            cases.push_back(std::move(c));
        }
    } else {
        for (const auto &entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            auto ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
            if (ext != ".stl") continue;
            const std::string stem = entry.path().stem().string();
            CaseInput c;
            c.mesh = entry.path();
            if (arch_override) {
                const auto split = split_case_stem(stem);
                c.case_id = split ? split->first : stem;
                c.arch = *arch_override;
            } else if (auto split = split_case_stem(stem)) {
                c.case_id = split->first;
                c.arch = split->second;
            } else {
                throw InvalidConfig(fmt::format("cannot infer the arch of '{}'; name it <case>_upper.stl or "
                                                "<case>_lower.stl, or pass --arch",
                                                entry.path().filename().string()));
            }
            c.ground_truth = default_gt(dir, gt_dir, c.key());
            cases.push_back(std::move(c));
        }
    }
    std::sort(cases.begin(), cases.end(), [](const CaseInput &a, const CaseInput &b) { return a.key() < b.key(); });
    for (std::size_t i = 1; i < cases.size(); ++i)
        if (cases[i].key() == cases[i - 1].key())
            throw InvalidConfig(fmt::format("duplicate case '{}'", cases[i].key()));
    return cases;
}

GeometryResult run_geometry(const fs::path &mesh_path, ArchSide side, const PipelineConfig &config) {
    TriangleMesh mesh = read_stl(mesh_path);
    const Point2Set projected = occlusal_projection(mesh);
    const Point2Set clipped = radial_preclip(projected, config.flatten.radial_quantile);
    ArchCurve curve = estimate_arch(clipped, config.arch_fit);
    Vertices render_vertices;
    if (config.variant.flatten_enabled) {
        const Vertices fitted = to_fitted_frame(mesh.vertices(), curve);
        const CurveSampling sampling = default_sampling(fitted, curve, config.flatten.sample_count);
        render_vertices = flatten_mesh(mesh, curve, sampling).flat_vertices;
    } else {
        render_vertices = to_fitted_frame(mesh.vertices(), curve);
    }
    MultiViewSet views = render_views(render_vertices, mesh.faces(), side, config.variant.render_mode, config.render);
    return {std::move(mesh), std::move(curve), std::move(render_vertices), std::move(views)};
}

nlohmann::ordered_json fit_diagnostics(const ArchCurve &curve) {
    return {{"theta_star", curve.theta_star},
            {"a", curve.a},
            {"b", curve.b},
            {"c", curve.c},
            {"rms_residual", curve.rms_residual},
            {"inlier_fraction", curve.inlier_fraction},
            {"origin_offset", {curve.origin_offset.x(), curve.origin_offset.y()}},
            {"stage_scores", curve.stage_scores}};
}

std::string config_fingerprint(const PipelineConfig &config, const DentalOntology &ontology, const CaseInput &input) {
    nlohmann::ordered_json j;
    j["settings"] = output_relevant_settings(config);
    j["ontology"] = sha256_hex(ontology.to_yaml());
    j["case"] = input.key();
    j["mesh"] = sha256_hex(read_file_bytes(input.mesh));
    return sha256_hex(j.dump());
}

CaseRecord run_case(const CaseInput &input, const PipelineConfig &config, const DentalOntology &ontology,
                    Backend &backend, const fs::path &outdir) {
    CaseRecord rec;
    rec.input = input;
    auto &meta = rec.metadata;
    meta["model"] = config.backend.model_name;
    meta["backend"] = backend.name();
    meta["mode"] = to_string(config.backend.mode);
    meta["mode_advisory"] = !backend.honours_mode();
    meta["variant"] = {{"name", config.variant.name()},
                       {"render_mode", to_string(config.variant.render_mode)},
                       {"flatten_enabled", config.variant.flatten_enabled},
                       {"dkb_enabled", config.variant.dkb_enabled}};
    try {
        meta["config_fingerprint"] = config_fingerprint(config, ontology, input);
        GeometryResult geo = run_geometry(input.mesh, input.arch, config);
        meta["fit"] = fit_diagnostics(geo.curve);
        meta["mesh"] = {{"vertices", geo.mesh.vertex_count()}, {"faces", geo.mesh.face_count()}};

        if (!outdir.empty()) {
            fs::create_directories(outdir);
            if (config.io.write_images)
                for (std::size_t i = 0; i < 3; ++i)
                    write_png(outdir / fmt::format("{}_{}_{}.png", input.key(), to_string(static_cast<ViewName>(i)),
                                                   to_string(config.variant.render_mode)),
                              geo.views.views[i]);
            if (config.io.write_flattened && config.variant.flatten_enabled)
                write_binary_stl(outdir / (input.key() + ".flat.stl"), geo.render_vertices, geo.mesh.faces());
        }

        const InferenceRequest request = build_request(geo.views, ontology, config.backend.mode,
                                                       config.backend.model_name, input.case_id,
                                                       config.variant.dkb_enabled);
        meta["request_digest"] = request.digest();
        meta["prompt_sha256"] = sha256_hex(request.prompt);
        meta["images"] = nlohmann::ordered_json::array();
        for (const auto &img : request.images)
            meta["images"].push_back({{"view", to_string(img.view)}, {"sha256", img.sha256}});

        int attempts = 0;
        const auto t0 = std::chrono::steady_clock::now();
        const std::string raw = infer(backend, request, config.backend.retry, &attempts);
        const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.outcome = parse_and_repair(raw, ontology, config.variant.dkb_enabled);
        if (!backend.deterministic()) {
            rec.outcome.latency = latency;
            meta["attempts"] = attempts;
        }
        rec.ok = true;
    } catch (const Error &e) {
        rec.error_kind = e.kind();
        rec.error_message = e.what();
    } catch (const std::exception &e) {
        rec.error_kind = "Error";
        rec.error_message = e.what();
    }
    return rec;
}

nlohmann::ordered_json to_json(const CaseRecord &r) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["case_id"] = r.input.case_id;
    j["arch"] = to_string(r.input.arch);
    j["status"] = r.ok ? "ok" : "failed";
    j["error"] = r.ok ? oj(nullptr) : oj{{"kind", r.error_kind}, {"message", r.error_message}};
    j["report"] = r.outcome.report ? to_json(*r.outcome.report) : oj(nullptr);
    j["validation"] = oj::array();
    for (const auto &v : r.outcome.violations)
        j["validation"].push_back({{"rule_id", v.rule_id}, {"severity", to_string(v.severity)}, {"detail", v.detail}});
    j["json_valid"] = r.outcome.json_valid;
    j["repair_applied"] = r.outcome.repair_applied;
    j["schema_errors"] = r.outcome.schema_errors;
    j["raw"] = r.outcome.raw;
    if (r.outcome.latency) j["latency_s"] = *r.outcome.latency;
    j["metadata"] = r.metadata;
    return j;
}

CaseRecord case_record_from_json(const nlohmann::json &v, const DentalOntology &ontology) {
    (void)ontology;
    CaseRecord r;
    r.input.case_id = v.at("case_id").get<std::string>();
    r.input.arch = parse_arch_side(v.at("arch").get<std::string>());
    r.ok = v.at("status").get<std::string>() == "ok";
    if (!r.ok && v.contains("error") && v["error"].is_object()) {
        r.error_kind = v["error"].value("kind", "");
        r.error_message = v["error"].value("message", "");
    }
    if (v.contains("report") && !v["report"].is_null()) {
        std::vector<std::string> errors;
        r.outcome.report = report_from_json(v["report"], errors);
    }
    for (const auto &e : v.value("validation", nlohmann::json::array()))
        r.outcome.violations.push_back({e.at("rule_id").get<std::string>(),
                                        e.at("severity").get<std::string>() == "error" ? Severity::Error
                                                                                       : Severity::Warning,
                                        e.value("detail", "")});
    r.outcome.json_valid = v.value("json_valid", false) && r.outcome.report.has_value();
    r.outcome.repair_applied = v.value("repair_applied", false);
    r.outcome.schema_errors = v.value("schema_errors", std::vector<std::string>{});
    r.outcome.raw = v.value("raw", "");
    if (v.contains("latency_s")) r.outcome.latency = v["latency_s"].get<double>();
    if (v.contains("metadata")) r.metadata = nlohmann::ordered_json::parse(v["metadata"].dump());
    return r;
}

std::unique_ptr<Backend> make_backend(const PipelineConfig &config, const DentalOntology &ontology,
                                      const std::vector<CaseInput> &cases) {
    if (config.backend.kind == "http") {
        HttpOptions h;
        h.url = config.backend.url;
        h.model_name = config.backend.model_name;
        h.timeout_s = config.backend.timeout_s;
        h.api_key_env = config.backend.api_key_env;
        h.thinking_field = config.backend.thinking_field;
        return std::make_unique<HttpBackend>(h);
    }
    MockOptions m;
    m.seed = config.mock.seed;
    m.corrupt_kind = config.mock.corrupt_kind;
    std::vector<std::string> keys;
    for (const auto &c : cases) keys.push_back(c.key());
    std::sort(keys.begin(), keys.end());
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(config.mock.corrupt_count), keys.size());
    m.corrupt_cases.insert(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k));
    return std::make_unique<MockBackend>(ontology, m);
}

std::vector<CaseRecord> run_batch(const std::vector<CaseInput> &cases, const PipelineConfig &config,
                                  const DentalOntology &ontology, Backend &backend, const fs::path &outdir,
                                  const BatchOptions &options) {
    std::vector<CaseRecord> records(cases.size());
    if (!outdir.empty()) fs::create_directories(outdir);
    std::mutex sink;
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            const CaseInput &input = cases[i];
            const fs::path report_path = outdir.empty() ? fs::path() : outdir / (input.key() + ".report.json");
            bool reused = false;
            if (options.resume && !report_path.empty() && fs::exists(report_path)) {
                try {
                    const auto stored = nlohmann::json::parse(read_text(report_path));
                    const auto expected = config_fingerprint(config, ontology, input);
                    if (stored.value("status", "") == "ok" &&
                        stored["metadata"].value("config_fingerprint", "") == expected) {
                        records[i] = case_record_from_json(stored, ontology);
                        records[i].input = input;
                        records[i].resumed = true;
                        reused = true;
                    }
                } catch (const std::exception &) {
                    reused = false;
                }
            }
            if (!reused) {
                records[i] = run_case(input, config, ontology, backend, outdir);
                if (!report_path.empty()) {
                    const std::string text = to_json(records[i]).dump(2) + "\n";
                    std::lock_guard lock(sink);
                    write_text(report_path, text);
                }
            }
            if (options.on_record) {
                std::lock_guard lock(sink);
                options.on_record(records[i]);
            }
        }
    };
    const int workers = std::max(1, std::min<int>(config.backend.max_concurrency, static_cast<int>(cases.size())));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto &t : pool) t.join();
    }
    return records;
}

namespace {

std::optional<StructuredReport> load_ground_truth(const fs::path &path) {
    if (path.empty() || !fs::exists(path)) return std::nullopt;
    const auto value = nlohmann::json::parse(read_text(path), nullptr, false);
    if (value.is_discarded()) throw InvalidConfig(fmt::format("ground truth is not JSON: {}", path.string()));
    std::vector<std::string> errors;
    auto gt = report_from_json(value, errors);
    if (!gt)
        throw InvalidConfig(fmt::format("ground truth {} does not match the report structure: {}", path.string(),
                                        errors.front()));
    return gt;
}

} // namespace

std::vector<CaseMetrics> evaluate_records(const std::vector<CaseRecord> &records, const DentalOntology &ontology) {
    std::vector<CaseMetrics> out;
    for (const auto &r : records) {
        const auto gt = load_ground_truth(r.input.ground_truth);
        if (!gt) continue;
        out.push_back(case_metrics(r.input.case_id, r.input.arch, r.ok ? &r.outcome : nullptr, *gt, ontology));
    }
    return out;
}

std::vector<CaseMetrics> evaluate_directory(const fs::path &reports_dir, const fs::path &gt_dir,
                                            const DentalOntology &ontology, std::vector<std::string> &unmatched) {
    if (!fs::is_directory(reports_dir))
        throw FileNotFound(fmt::format("reports directory not found: {}", reports_dir.string()));
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(reports_dir))
        if (entry.is_regular_file() && entry.path().filename().string().ends_with(".report.json"))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<CaseMetrics> out;
    for (const auto &file : files) {
        const auto value = nlohmann::json::parse(read_text(file), nullptr, false);
        if (value.is_discarded()) {
            unmatched.push_back(file.filename().string() + " (unreadable)");
            continue;
        }
        CaseRecord r = case_record_from_json(value, ontology);
        r.input.ground_truth = gt_dir / (r.input.key() + ".gt.json");
        const auto gt = load_ground_truth(r.input.ground_truth);
        if (!gt) {
            unmatched.push_back(r.input.key());
            continue;
        }
        out.push_back(case_metrics(r.input.case_id, r.input.arch, r.ok ? &r.outcome : nullptr, *gt, ontology));
    }
    return out;
}

void write_ablation_summary(const fs::path &path, const std::vector<AblationRow> &rows) {
    static constexpr std::array<std::size_t, 7> columns{0, 1, 2, 5, 6, 7, 8}; // AE RE Acc MacroF1 StageAcc JsonValid Halluc
    std::ostringstream out;
    out << "variant,records";
    for (std::size_t k : columns) out << ',' << kMetricNames[k] << "_mean," << kMetricNames[k] << "_std";
    out << '\n';
    for (const auto &row : rows) {
        const auto name = row.variant.name();
        out << (name.find(',') != std::string::npos ? "\"" + name + "\"" : name) << ',' << row.records;
        for (std::size_t k : columns) {
            const auto &m = row.summary.metrics[k];
            out << ',' << csv_number(m ? std::optional(m->mean) : std::nullopt) << ','
                << csv_number(m ? std::optional(m->std) : std::nullopt);
        }
        out << '\n';
    }
    write_text(path, out.str());
}

std::vector<AblationRow> run_ablation_grid(const std::vector<CaseInput> &cases, const PipelineConfig &config,
                                           const DentalOntology &ontology, const fs::path &outdir) {
    std::vector<AblationRow> rows;
    for (const Variant &variant : ablation_variants()) {
        PipelineConfig vc = config;
        vc.variant = variant;
        const fs::path dir = outdir / "ablation" / variant.slug();
        auto backend = make_backend(vc, ontology, cases);
        BatchOptions options;
        options.resume = true;
        const auto records = run_batch(cases, vc, ontology, *backend, dir, options);
        const auto metrics = evaluate_records(records, ontology);
        write_metric_files(dir, metrics, variant.name());
        AblationRow row;
        row.variant = variant;
        row.summary = aggregate(metrics, "all");
        row.records = records.size();
        rows.push_back(std::move(row));
    }
    fs::create_directories(outdir);
    write_ablation_summary(outdir / "ablation_summary.csv", rows);
    return rows;
}

} // namespace archmap
