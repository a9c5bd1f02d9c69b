#include "doctest.h"

#include "archmap/pipeline.hpp"
#include "archmap/synth.hpp"
#include "fixtures.hpp"

using namespace archmap;
using fixtures::cli;
using fixtures::Scratch;

namespace {

const DentalOntology &ontology() {
    static const DentalOntology o = load_ontology();
    return o;
}

PipelineConfig small_config(const std::filesystem::path &out) {
    PipelineConfig c = parse_config(fixtures::kSmallRenderIni);
    c.io.output_dir = out;
    return c;
}

void make_dataset(const std::filesystem::path &dir, int count, std::uint64_t seed = 1) {
    SynthDatasetOptions o;
    o.count = count;
    o.seed = seed;
    write_synthetic_dataset(dir, o, ontology());
}

std::string strip_metadata_paths(nlohmann::ordered_json j) { return j.dump(); }

} // namespace

TEST_SUITE("config") {

TEST_CASE("defaults are the full variant") {
    const PipelineConfig c = parse_config("");
    CHECK(c.variant == Variant{});
    CHECK(c.variant.name() == "Full (SSP + Flatten + DKB)");
    CHECK(c.backend.kind == "mock");
    CHECK(c.arch_fit.coarse_step == 1.0);
    CHECK(c.arch_fit.refine_half_window == 5.0);
    CHECK(c.arch_fit.refine_iterations == 2);
    CHECK(c.arch_fit.clip_quantile == 0.95);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("values, paths and rejections") {
    const PipelineConfig c = parse_config("[arch_fit]\ncoarse_step = 0.5\n[render]\nbackground = 10,20,30\n"
                                          "light_direction = 0,0,1\n[backend]\nmode = thinking\n"
                                          "[variant]\nrender_mode = uvp\nflatten_enabled = false\n"
                                          "[eval]\nground_truth_dir = gt\n[io]\noutput_dir = out\n",
                                          "/data/run");
    CHECK(c.arch_fit.coarse_step == 0.5);
    CHECK(c.render.background == Rgb8(10, 20, 30));
    CHECK(c.backend.mode == InferenceMode::Thinking);
    CHECK(c.variant.render_mode == RenderMode::UVP);
    CHECK_FALSE(c.variant.flatten_enabled);
    CHECK(c.io.ground_truth_dir == "/data/run/gt");
    CHECK(c.io.output_dir == "/data/run/out");
    CHECK_THROWS_AS(parse_config("[arch_fit]\nstep = 1\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("[colour]\nx = 1\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("[arch_fit]\ncoarse_step = fast\n"), InvalidConfig);
    CHECK_THROWS_AS(parse_config("[backend]\nkind = http\n").validate(), InvalidConfig);
    CHECK_THROWS_AS(parse_config("[io]\nontology = /missing.yaml\n").validate(), InvalidConfig);
}

TEST_CASE("ablation variants") {
    const auto v = ablation_variants();
    const std::vector<std::string> names{"Full (SSP + Flatten + DKB)", "No DKB", "UVP", "No-Flatten", "No DKB + UVP",
                                         "No DKB + No-Flatten", "UVP + No-Flatten", "No DKB + UVP + No-Flatten"};
    for (std::size_t i = 0; i < 8; ++i) CHECK(v[i].name() == names[i]);
    CHECK(v[0].slug() == "full");
    CHECK(v[7].slug() == "no-dkb_uvp_no-flatten");
}

}

TEST_SUITE("pipeline") {

TEST_CASE("case discovery") {
    Scratch s("discovery");
    fixtures::spit(s / "b_lower.stl", "x");
    fixtures::spit(s / "a_upper.stl", "x");
    fixtures::spit(s / "notes.txt", "x");
    const auto cases = discover_cases(s.path);
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].key() == "a_upper");
    CHECK(cases[1].arch == ArchSide::Mandibular);
    CHECK(cases[0].ground_truth == s / "a_upper.gt.json");
    fixtures::spit(s / "plain.stl", "x");
    CHECK_THROWS_AS(discover_cases(s.path), InvalidConfig);
    CHECK(discover_cases(s.path, ArchSide::Maxillary).size() == 3);
    CHECK_THROWS_AS(discover_cases(s / "missing"), FileNotFound);
}

TEST_CASE("synthetic arch through the mock gives its emission") {
    Scratch s("run_case");
    make_dataset(s.path, 2);
    const PipelineConfig config = small_config(s / "out");
    const auto cases = discover_cases(s.path);
    auto backend = make_backend(config, ontology(), cases);
    const CaseRecord rec = run_case(cases[0], config, ontology(), *backend, s / "out");
    REQUIRE(rec.ok);
    CHECK(rec.outcome.json_valid);
    CHECK(rec.outcome.violations.empty());
    const GeometryResult geo = run_geometry(cases[0].mesh, cases[0].arch, config);
    const InferenceRequest req = build_request(geo.views, ontology(), config.backend.mode, config.backend.model_name,
                                               cases[0].case_id);
    CHECK(*rec.outcome.report == MockBackend(ontology(), {}).emission(req));
    CHECK(rec.metadata["request_digest"] == req.digest());
    CHECK(rec.metadata["mode"] == "non-thinking");
    const auto j = to_json(rec);
    CHECK((!j.contains("latency_s") || j["latency_s"].is_null()));
}

TEST_CASE("batch isolation, determinism and resume") {
    Scratch s("batch");
    make_dataset(s.path, 3);
    fixtures::spit(s / "case004_lower.stl", "solid broken\nfacet normal 0 0 1\n");
    {
        std::ofstream manifest(s / "manifest.csv", std::ios::app);
        manifest << "case004,lower,case004_lower.stl,,0,0\n";
    }
    const PipelineConfig config = small_config(s / "out");
    const auto cases = discover_cases(s.path);
    REQUIRE(cases.size() == 4);
    auto backend = make_backend(config, ontology(), cases);
    const auto first = run_batch(cases, config, ontology(), *backend, s / "out");
    REQUIRE(first.size() == 4);
    CHECK_FALSE(first[3].ok);
    CHECK(first[3].error_kind == "MalformedAscii");
    CHECK(first[0].ok);
    const auto again = run_batch(cases, config, ontology(), *backend, s / "out");
    for (std::size_t i = 0; i < 4; ++i) CHECK(strip_metadata_paths(to_json(first[i])) == strip_metadata_paths(to_json(again[i])));

    BatchOptions resume;
    resume.resume = true;
    const auto resumed = run_batch(cases, config, ontology(), *backend, s / "out", resume);
    CHECK(resumed[0].resumed);
    CHECK_FALSE(resumed[3].resumed);
    CHECK(nlohmann::json::parse(to_json(resumed[1]).dump()) == nlohmann::json::parse(to_json(first[1]).dump()));

    auto changed = config;
    changed.mock.seed = 99;
    auto other = make_backend(changed, ontology(), cases);
    CHECK_FALSE(run_batch(cases, changed, ontology(), *other, s / "out", resume)[0].resumed);
}

TEST_CASE("persisted records round trip") {
    Scratch s("records");
    make_dataset(s.path, 1);
    const PipelineConfig config = small_config(s / "out");
    const auto cases = discover_cases(s.path);
    auto backend = make_backend(config, ontology(), cases);
    const CaseRecord rec = run_case(cases[0], config, ontology(), *backend, s / "out");
    const CaseRecord back = case_record_from_json(nlohmann::json::parse(to_json(rec).dump()), ontology());
    CHECK(nlohmann::json::parse(to_json(back).dump()) == nlohmann::json::parse(to_json(rec).dump()));
}

TEST_CASE("no-dkb and no-flatten touch only their own stage") {
    Scratch s("toggles");
    make_dataset(s.path, 1);
    const auto cases = discover_cases(s.path);
    PipelineConfig full = small_config(s / "out");
    PipelineConfig flat_off = full;
    flat_off.variant.flatten_enabled = false;
    const GeometryResult a = run_geometry(cases[0].mesh, cases[0].arch, full);
    const GeometryResult b = run_geometry(cases[0].mesh, cases[0].arch, flat_off);
    CHECK(fit_diagnostics(a.curve) == fit_diagnostics(b.curve));
    CHECK_FALSE(a.views.views[0] == b.views.views[0]);

    PipelineConfig dkb_off = full;
    dkb_off.variant.dkb_enabled = false;
    auto backend = make_backend(full, ontology(), cases);
    const CaseRecord with = run_case(cases[0], full, ontology(), *backend, s / "a");
    const CaseRecord without = run_case(cases[0], dkb_off, ontology(), *backend, s / "b");
    CHECK(with.metadata["images"] == without.metadata["images"]);
    CHECK(with.metadata["prompt_sha256"] != without.metadata["prompt_sha256"]);
}

}

TEST_SUITE("cli") {

TEST_CASE("flatten") {
    Scratch s("cli_flatten");
    const auto ds = s / "ds";
    CHECK(cli({"synth", ds.string(), "-n", "2", "--seed", "5"}).status == 0);
    const auto manifest = fixtures::read_csv(ds / "manifest.csv");
    const double theta = std::stod(manifest[1][4]);
    const auto r = cli({"flatten", (ds / "case001_upper.stl").string(), (s / "flat.stl").string()});
    REQUIRE(r.status == 0);
    const auto at = r.out.find("theta_star: ");
    REQUIRE(at != std::string::npos);
    CHECK(std::abs(std::stod(r.out.substr(at + 12)) - theta) <= 0.5);
    CHECK(r.out.find("rms_residual") != std::string::npos);
    CHECK(read_stl(s / "flat.stl").face_count() == read_stl(ds / "case001_upper.stl").face_count());

    const auto missing = cli({"flatten", (s / "none.stl").string(), (s / "o.stl").string()});
    CHECK(missing.status != 0);
    CHECK(missing.err.find("file not found") != std::string::npos);

    fixtures::spit(s / "bad.stl", std::string(84, '\0') + "\x05");
    auto bytes = fixtures::slurp(s / "bad.stl");
    bytes[80] = 5;
    fixtures::spit(s / "bad.stl", bytes);
    const auto corrupt = cli({"flatten", (s / "bad.stl").string(), (s / "o.stl").string()});
    CHECK(corrupt.status != 0);
    CHECK((corrupt.err.find("TruncatedFile") != std::string::npos || corrupt.err.find("MalformedAscii") != std::string::npos));
}

TEST_CASE("render") {
    Scratch s("cli_render");
    fixtures::spit(s / "small.ini", fixtures::kSmallRenderIni);
    const auto ds = s / "ds";
    cli({"synth", ds.string(), "-n", "1"});
    const std::string mesh = (ds / "case001_upper.stl").string();
    const std::string cfg = (s / "small.ini").string();
    REQUIRE(cli({"render", mesh, (s / "a").string(), "-c", cfg}).status == 0);
    REQUIRE(cli({"render", mesh, (s / "b").string(), "-c", cfg}).status == 0);
    for (const char *view : {"front", "back", "bottom"}) {
        const std::string name = std::string("case001_upper_") + view + "_ssp.png";
        REQUIRE(std::filesystem::exists(s / "a" / name));
        CHECK(fixtures::slurp(s / "a" / name) == fixtures::slurp(s / "b" / name));
    }
    REQUIRE(cli({"render", mesh, (s / "u").string(), "-c", cfg, "--mode", "uvp"}).status == 0);
    CHECK(std::filesystem::exists(s / "u" / "case001_upper_front_uvp.png"));
    REQUIRE(cli({"render", mesh, (s / "n").string(), "-c", cfg, "--no-flatten"}).status == 0);
    CHECK(fixtures::slurp(s / "n" / "case001_upper_front_ssp.png") != fixtures::slurp(s / "a" / "case001_upper_front_ssp.png"));
    CHECK(cli({"render", (s / "small.ini").string(), (s / "x").string()}).status != 0);
}

TEST_CASE("infer") {
    Scratch s("cli_infer");
    fixtures::spit(s / "small.ini", fixtures::kSmallRenderIni);
    const auto ds = s / "ds";
    cli({"synth", ds.string(), "-n", "2"});
    const std::string cfg = (s / "small.ini").string();
    const auto r = cli({"infer", ds.string(), "-o", (s / "out").string(), "-c", cfg, "--infer-mode", "thinking"});
    REQUIRE(r.status == 0);
    const auto j = nlohmann::json::parse(fixtures::slurp(s / "out" / "case001_upper.report.json"));
    CHECK(j["status"] == "ok");
    CHECK(j["json_valid"] == true);
    CHECK(j["metadata"]["mode"] == "thinking");
    CHECK(j["validation"].empty());

    const auto down = cli({"infer", ds.string(), "-o", (s / "down").string(), "-c", cfg, "--backend", "http", "--url",
                           "http://127.0.0.1:9/v1/chat/completions"});
    CHECK(down.status != 0);
    const auto failed = nlohmann::json::parse(fixtures::slurp(s / "down" / "case002_lower.report.json"));
    CHECK(failed["status"] == "failed");
    CHECK(failed["error"]["kind"] == "BackendUnreachable");
}

TEST_CASE("eval") {
    Scratch s("cli_eval");
    fixtures::spit(s / "small.ini", fixtures::kSmallRenderIni);
    const auto ds = s / "ds";
    cli({"synth", ds.string(), "-n", "4"});
    const std::string cfg = (s / "small.ini").string();
    REQUIRE(cli({"infer", ds.string(), "-o", (s / "reports").string(), "-c", cfg}).status == 0);
    REQUIRE(cli({"eval", (s / "reports").string(), ds.string(), (s / "m1").string()}).status == 0);
    REQUIRE(cli({"eval", (s / "reports").string(), ds.string(), (s / "m2").string()}).status == 0);
    CHECK(fixtures::slurp(s / "m1" / "metrics.csv") == fixtures::slurp(s / "m2" / "metrics.csv"));
    CHECK(fixtures::slurp(s / "m1" / "per_case.csv") == fixtures::slurp(s / "m2" / "per_case.csv"));
    const auto rows = fixtures::read_csv(s / "m1" / "per_case.csv");
    REQUIRE(rows.size() == 5);
    CHECK(rows[0][10] == "RE");
    CHECK(rows[0][11] == "Acc");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][11]) == doctest::Approx(100 - std::stod(rows[i][10])));

    std::filesystem::create_directories(s / "empty");
    const auto none = cli({"eval", (s / "empty").string(), ds.string(), (s / "m3").string()});
    CHECK(none.status != 0);
    CHECK(none.err.find("no cases") != std::string::npos);

    std::filesystem::create_directories(s / "nogt");
    const auto unmatched = cli({"eval", (s / "reports").string(), (s / "nogt").string(), (s / "m4").string()});
    CHECK(unmatched.status != 0);
    CHECK(unmatched.err.find("case001_upper") != std::string::npos);
}

TEST_CASE("stages compose into the end-to-end run") {
    Scratch s("cli_compose");
    fixtures::spit(s / "small.ini", fixtures::kSmallRenderIni);
    const auto ds = s / "ds";
    cli({"synth", ds.string(), "-n", "3"});
    const std::string cfg = (s / "small.ini").string();
    REQUIRE(cli({"infer", ds.string(), "-o", (s / "staged").string(), "-c", cfg}).status == 0);
    REQUIRE(cli({"eval", (s / "staged").string(), ds.string(), (s / "staged").string()}).status == 0);
    REQUIRE(cli({"pipeline", ds.string(), "-o", (s / "e2e").string(), "-c", cfg}).status == 0);
    for (const char *f : {"metrics.csv", "per_case.csv", "categories.csv", "case002_lower.report.json",
                          "case001_upper_bottom_ssp.png"})
        CHECK(fixtures::slurp(s / "staged" / f) == fixtures::slurp(s / "e2e" / f));
}

TEST_CASE("ablate") {
    Scratch s("cli_ablate");
    fixtures::spit(s / "small.ini", fixtures::kSmallRenderIni);
    const auto ds = s / "ds";
    cli({"synth", ds.string(), "-n", "2"});
    const std::string cfg = (s / "small.ini").string();
    REQUIRE(cli({"ablate", ds.string(), "-o", (s / "a").string(), "-c", cfg}).status == 0);
    const auto rows = fixtures::read_csv(s / "a" / "ablation_summary.csv");
    REQUIRE(rows.size() == 9);
    CHECK(rows[1][0] == "Full (SSP + Flatten + DKB)");
    CHECK(rows[8][0] == "No DKB + UVP + No-Flatten");
    const std::string before = fixtures::slurp(s / "a" / "ablation_summary.csv");

    // resume after losing one variant's outputs
    std::filesystem::remove_all(s / "a" / "ablation" / "uvp");
    REQUIRE(cli({"ablate", ds.string(), "-o", (s / "a").string(), "-c", cfg}).status == 0);
    CHECK(fixtures::slurp(s / "a" / "ablation_summary.csv") == before);

    REQUIRE(cli({"ablate", ds.string(), "-o", (s / "b").string(), "-c", cfg, "--seed", "1234"}).status == 0);
    const auto reseeded = fixtures::read_csv(s / "b" / "ablation_summary.csv");
    REQUIRE(reseeded.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) CHECK(reseeded[i][0] == rows[i][0]);
    CHECK(reseeded[0] == rows[0]);
}

TEST_CASE("usage errors") {
    CHECK(cli({}).status != 0);
    CHECK(cli({"bogus"}).status != 0);
    CHECK(cli({"flatten"}).status != 0);
    CHECK(cli({"--help"}).status == 0);
}

}
