#include "doctest.h"

#include <random>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "archmap/dkb.hpp"
#include "catalog.hpp"

using namespace archmap;

namespace {

const DentalOntology &ontology() {
    static const DentalOntology o = load_ontology();
    return o;
}

std::string bundled_text() {
    std::ifstream in(default_ontology_path());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::set<int> as_set(const std::vector<int> &v) { return {v.begin(), v.end()}; }

} // namespace

TEST_SUITE("dkb") {

TEST_CASE("bundled ontology") {
    const auto &o = ontology();
    CHECK(o.region_of(14) == Region::Premolar);
    CHECK(o.region_of(12) == Region::Anterior);
    CHECK(o.region_of(45) == Region::Premolar);
    CHECK_THROWS_AS(o.region_of(19), UnknownCode);
    CHECK(o.size_of(32) == SizeClass::Small);
    CHECK(o.size_of(11) == SizeClass::Medium);
    CHECK(o.size_of(37) == SizeClass::Large);
    CHECK_THROWS_AS(o.size_of(99), UnknownCode);
    CHECK(o.special_rules().size() == 5);
}

TEST_CASE("partitions") {
    const auto &o = ontology();
    CHECK(o.region_class(Region::Anterior).fdi.size() == 12);
    CHECK(o.region_class(Region::Premolar).fdi.size() == 8);
    CHECK(o.region_class(Region::Molar).fdi.size() == 12);
    CHECK(o.size_class(SizeClass::Large).fdi.size() == 12);
    CHECK(o.size_class(SizeClass::Medium).fdi.size() == 16);
    CHECK(o.size_class(SizeClass::Small).fdi.size() == 4);
    CHECK(as_set(o.size_class(SizeClass::Large).fdi) == as_set(o.region_class(Region::Molar).fdi));
    std::set<int> seen;
    for (Region r : kRegions)
        for (int c : o.region_class(r).fdi) CHECK(seen.insert(c).second);
    CHECK(seen == as_set(DentalOntology::valid_fdi()));
    for (int c : DentalOntology::valid_fdi()) {
        int hits = 0;
        for (SizeClass s : kSizeClasses) hits += static_cast<int>(as_set(o.size_class(s).fdi).count(c));
        CHECK(hits == 1);
    }
    CHECK(DentalOntology::deciduous_fdi().size() == 20);
}

TEST_CASE("count policies") {
    const auto &o = ontology();
    const auto &d = o.expected_counts(DentitionStage::Deciduous);
    CHECK(d.total == CountRange{20, 20});
    CHECK(d.per_arch == CountRange{10, 10});
    CHECK(d.per_quadrant == CountRange{5, 5});
    const auto &p = o.expected_counts(DentitionStage::Permanent);
    CHECK(p.total == CountRange{28, 32});
    CHECK(p.per_arch == CountRange{14, 16});
    CHECK_FALSE(p.variable);
    CHECK(o.expected_counts(DentitionStage::Mixed).variable);
}

TEST_CASE("invalid ontology files") {
    std::string text = bundled_text();
    const std::string from = "fdi: [16, 17, 18, 26, 27, 28, 36, 37, 38, 46, 47, 48]\n  medium";
    REQUIRE(text.find(from) != std::string::npos);
    std::string no48 = text;
    no48.replace(no48.find(from), from.size(), "fdi: [16, 17, 18, 26, 27, 28, 36, 37, 38, 46, 47]\n  medium");
    CHECK_THROWS_AS(DentalOntology::from_yaml(no48), OntologyInvalid);

    std::string twenty_one = text;
    twenty_one.replace(twenty_one.find("total: [20, 20]"), 15, "total: [21, 21]");
    CHECK_THROWS_AS(DentalOntology::from_yaml(twenty_one), OntologyInvalid);

    CHECK_THROWS_AS(DentalOntology::from_yaml("tooth_count: {}"), OntologyInvalid);
    CHECK_THROWS_AS(load_ontology("/nonexistent/dkb.yaml"), FileNotFound);
}

TEST_CASE("save and reload") {
    const auto path = std::filesystem::temp_directory_path() / "archmap_dkb_roundtrip.yaml";
    save_ontology(path, ontology());
    CHECK(load_ontology(path) == ontology());
    CHECK(DentalOntology::from_yaml(ontology().to_yaml()) == ontology());
    std::filesystem::remove(path);
}

TEST_CASE("violation catalog") {
    for (const auto &e : catalog::entries()) {
        CAPTURE(e.name);
        const auto v = validate_report(e.report, ontology());
        CHECK(catalog::observed(v) == e.expected);
        CHECK(v.size() == e.expected.size());
        for (std::size_t i = 1; i < v.size(); ++i) {
            const auto pos = [](const std::string &id) {
                return std::find(kRuleIds.begin(), kRuleIds.end(), id) - kRuleIds.begin();
            };
            CHECK(pos(v[i - 1].rule_id) < pos(v[i].rule_id));
        }
    }
}

TEST_CASE("deciduous and mixed arches") {
    auto prim = catalog::make(ArchSide::Mandibular, catalog::join(catalog::range(71, 75), catalog::range(81, 85)),
                              DentitionStage::Deciduous);
    CHECK(validate_report(prim, ontology()).empty());
    auto mixed = catalog::make(ArchSide::Maxillary, {11, 12, 16, 21, 22, 26, 53, 54, 55, 63, 64, 65},
                               DentitionStage::Mixed);
    CHECK(validate_report(mixed, ontology()).empty());
    mixed.dentition_stage = DentitionStage::Deciduous;
    CHECK(catalog::observed(validate_report(mixed, ontology())) ==
          catalog::Expected{{"morphology-stage", Severity::Warning}, {"stage-count-range", Severity::Error}});
}

TEST_CASE("documenting a gap never adds a continuity violation") {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> codes;
        for (int q : {3, 4})
            for (int p = 1; p <= 8; ++p)
                if (rng() % 4) codes.push_back(10 * q + p);
        if (codes.empty()) continue;
        auto r = catalog::make(ArchSide::Mandibular, codes, DentitionStage::Permanent);
        r.third_molar_evidence = true;
        const bool before = catalog::observed(validate_report(r, ontology())).count({"numbering-continuity", Severity::Error});
        for (int q : {3, 4})
            for (int p = 1; p <= 8; ++p)
                if (!std::binary_search(r.fdi_present.begin(), r.fdi_present.end(), 10 * q + p) && rng() % 2) {
                    r.anomalies.push_back({AnomalyKind::Missing, 10 * q + p, "lower arch", "", ""});
                    const bool after =
                        catalog::observed(validate_report(r, ontology())).count({"numbering-continuity", Severity::Error});
                    CHECK(after <= before);
                }
    }
}

TEST_CASE("clean reports stay clean") {
    for (const auto &e : catalog::entries()) {
        if (!e.expected.empty()) continue;
        const auto r = e.report;
        CHECK(validate_report(r, ontology()).empty());
        CHECK(validate_report(r, ontology()).empty());
    }
}

TEST_CASE("out-of-ontology labels") {
    auto r = catalog::make(ArchSide::Maxillary, {11, 19, 21}, DentitionStage::Permanent);
    r.unknown_labels = {"stage:adult"};
    const auto labels = out_of_ontology_labels(r, ontology());
    CHECK(labels == std::vector<std::string>{"stage:adult", "fdi:19"});
    CHECK(catalog::observed(validate_report(r, ontology())).count({"fdi-validity", Severity::Error}) == 1);
}

TEST_CASE("prompt") {
    const auto schema = report_schema(ontology());
    const std::string upper = render_prompt(ontology(), ArchSide::Maxillary, schema);
    const std::string lower = render_prompt(ontology(), ArchSide::Mandibular, schema);
    CHECK(upper == render_prompt(ontology(), ArchSide::Maxillary, schema));
    std::size_t at = 0;
    for (const auto &rule : ontology().special_rules()) {
        const auto found = upper.find(rule, at);
        REQUIRE(found != std::string::npos);
        at = found + rule.size();
    }
    CHECK(lower.find("lower (mandibular) dental arch only") != std::string::npos);
    CHECK(lower.find("upper (maxillary) dental arch only") == std::string::npos);
    std::size_t last = 0;
    for (const char *stage : {"teeth_number", "anatomical_counts", "size_counts", "dentition_stage", "anomalies"}) {
        const auto pos = upper.find(stage);
        REQUIRE(pos != std::string::npos);
        CHECK(pos >= last);
        last = pos;
    }
    CHECK(upper.find(schema.dump(2)) != std::string::npos);

    const std::string minimal = minimal_prompt(ArchSide::Mandibular, schema);
    CHECK(minimal.find(ontology().special_rules()[0]) == std::string::npos);
    CHECK(minimal.find("lower (mandibular)") != std::string::npos);
}

TEST_CASE("schema enums come from the ontology") {
    const auto schema = report_schema(ontology());
    const std::string text = schema.dump();
    for (const char *label : {"deciduous", "mixed", "permanent", "supernumerary", "malocclusion"})
        CHECK(text.find(label) != std::string::npos);
    CHECK(schema["properties"].contains("fdi_present"));
}

}
