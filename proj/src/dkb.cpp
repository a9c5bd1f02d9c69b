#include "archmap/dkb.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

namespace archmap {

namespace {

constexpr std::array<DentitionStage, 3> kStages{DentitionStage::Deciduous, DentitionStage::Mixed,
                                                DentitionStage::Permanent};

std::size_t idx(auto e) { return static_cast<std::size_t>(e); }

YAML::Node need(const YAML::Node &node, const std::string &key, const std::string &where) {
    YAML::Node child = node[key];
    if (!child) throw OntologyInvalid(fmt::format("missing '{}' in {}", key, where));
    return child;
}

CountRange read_range(const YAML::Node &node, const std::string &where) {
    if (!node.IsSequence() || node.size() != 2) throw OntologyInvalid(fmt::format("{} must be [min, max]", where));
    return {node[0].as<int>(), node[1].as<int>()};
}

std::vector<int> read_codes(const YAML::Node &node, const std::string &where) {
    if (!node.IsSequence()) throw OntologyInvalid(fmt::format("{} must be a list of FDI codes", where));
    std::vector<int> out;
    for (const auto &n : node) out.push_back(n.as<int>());
    return out;
}

void emit_range(YAML::Emitter &out, const char *key, const CountRange &r) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << r.min << r.max << YAML::EndSeq;
}

void emit_codes(YAML::Emitter &out, const std::vector<int> &codes) {
    out << YAML::Flow << YAML::BeginSeq;
    for (int c : codes) out << c;
    out << YAML::EndSeq;
}

int quadrant(int fdi) { return fdi / 10; }
int position(int fdi) { return fdi % 10; }

bool upper_quadrant(int q) { return q == 1 || q == 2 || q == 5 || q == 6; }

std::string join(const std::vector<std::string> &parts) { return fmt::format("{}", fmt::join(parts, "; ")); }

} // namespace

std::vector<int> DentalOntology::valid_fdi() {
    std::vector<int> out;
    for (int q = 1; q <= 4; ++q)
        for (int p = 1; p <= 8; ++p) out.push_back(10 * q + p);
    return out;
}

std::vector<int> DentalOntology::deciduous_fdi() {
    std::vector<int> out;
    for (int q = 5; q <= 8; ++q)
        for (int p = 1; p <= 5; ++p) out.push_back(10 * q + p);
    return out;
}

void DentalOntology::index() {
    region_map_.clear();
    size_map_.clear();
    deciduous_region_map_.clear();
    deciduous_size_map_.clear();
    auto fill = [](auto &map, const auto &lists, const auto &labels, const char *what) {
        for (std::size_t k = 0; k < lists.size(); ++k)
            for (int code : lists[k])
                if (!map.emplace(code, labels[k]).second)
                    throw OntologyInvalid(fmt::format("FDI {} listed twice in {}", code, what));
    };
    std::array<std::vector<int>, 3> region_lists, size_lists;
    for (std::size_t k = 0; k < 3; ++k) {
        region_lists[k] = regions_[k].fdi;
        size_lists[k] = sizes_[k].fdi;
    }
    fill(region_map_, region_lists, kRegions, "regions");
    fill(size_map_, size_lists, kSizeClasses, "sizes");
    fill(deciduous_region_map_, deciduous_regions_, kRegions, "deciduous_regions");
    fill(deciduous_size_map_, deciduous_sizes_, kSizeClasses, "deciduous_sizes");
}

void DentalOntology::validate() const {
    const auto valid = valid_fdi();
    const std::set<int> valid_set(valid.begin(), valid.end());
    const auto deciduous = deciduous_fdi();
    const std::set<int> deciduous_set(deciduous.begin(), deciduous.end());

    auto check_total = [](const auto &map, const std::set<int> &domain, const char *what) {
        for (int code : domain)
            if (!map.contains(code)) throw OntologyInvalid(fmt::format("{} has no entry for FDI {}", what, code));
        for (const auto &[code, _] : map)
            if (!domain.contains(code)) throw OntologyInvalid(fmt::format("{} lists unknown FDI {}", what, code));
    };
    check_total(region_map_, valid_set, "region map");
    check_total(size_map_, valid_set, "size map");
    check_total(deciduous_region_map_, deciduous_set, "deciduous region map");
    check_total(deciduous_size_map_, deciduous_set, "deciduous size map");

    const std::array<std::size_t, 3> region_sizes{12, 8, 12}, size_sizes{12, 16, 4};
    for (std::size_t k = 0; k < 3; ++k) {
        if (regions_[k].fdi.size() != region_sizes[k])
            throw OntologyInvalid(fmt::format("region '{}' has {} codes, expected {}", to_string(kRegions[k]),
                                              regions_[k].fdi.size(), region_sizes[k]));
        if (sizes_[k].fdi.size() != size_sizes[k])
            throw OntologyInvalid(fmt::format("size '{}' has {} codes, expected {}", to_string(kSizeClasses[k]),
                                              sizes_[k].fdi.size(), size_sizes[k]));
        for (const auto &[name, codes] : regions_[k].subtypes)
            for (int code : codes)
                if (region_map_.contains(code) && region_map_.at(code) != kRegions[k])
                    throw OntologyInvalid(fmt::format("subtype '{}' lists FDI {} outside its region", name, code));
    }

    const auto &dec = policies_[idx(DentitionStage::Deciduous)];
    if (dec.total.min != 20 || dec.total.max != 20)
        throw OntologyInvalid("deciduous total must be exactly 20");
    const auto &perm = policies_[idx(DentitionStage::Permanent)];
    if (perm.total.min < 28 || perm.total.max > 32 || perm.total.min > perm.total.max)
        throw OntologyInvalid("permanent total must lie within [28, 32]");
    for (DentitionStage s : kStages) {
        const auto &p = policies_[idx(s)];
        for (const CountRange *r : {&p.total, &p.per_arch, &p.per_quadrant})
            if (r->min < 0 || r->min > r->max)
                throw OntologyInvalid(fmt::format("bad count range for stage '{}'", to_string(s)));
    }
    if (special_rules_.size() != 5)
        throw OntologyInvalid(fmt::format("expected 5 special rules, found {}", special_rules_.size()));
}

Region DentalOntology::region_of(int fdi) const {
    if (auto it = region_map_.find(fdi); it != region_map_.end()) return it->second;
    if (auto it = deciduous_region_map_.find(fdi); it != deciduous_region_map_.end()) return it->second;
    throw UnknownCode(fmt::format("FDI {} is not in the ontology", fdi));
}

SizeClass DentalOntology::size_of(int fdi) const {
    if (auto it = size_map_.find(fdi); it != size_map_.end()) return it->second;
    if (auto it = deciduous_size_map_.find(fdi); it != deciduous_size_map_.end()) return it->second;
    throw UnknownCode(fmt::format("FDI {} is not in the ontology", fdi));
}

const CountPolicy &DentalOntology::expected_counts(DentitionStage stage) const { return policies_[idx(stage)]; }

const std::string &DentalOntology::stage_description(DentitionStage stage) const {
    return stage_descriptions_[idx(stage)];
}

DentalOntology DentalOntology::from_yaml(const std::string &text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception &e) {
        throw OntologyInvalid(fmt::format("ontology is not valid YAML: {}", e.what()));
    }
    DentalOntology o;
    try {
        const auto counts = need(root, "tooth_count", "ontology");
        const auto stages = need(root, "dentition_stages", "ontology");
        for (DentitionStage s : kStages) {
            const auto name = to_string(s);
            const auto node = need(counts, name, "tooth_count");
            auto &p = o.policies_[idx(s)];
            p.description = node["description"] ? node["description"].as<std::string>() : "";
            p.variable = node["variable"] ? node["variable"].as<bool>() : false;
            p.total = read_range(need(node, "total", name), name + ".total");
            p.per_arch = read_range(need(node, "per_arch", name), name + ".per_arch");
            p.per_quadrant = read_range(need(node, "per_quadrant", name), name + ".per_quadrant");
            p.notes = node["notes"] ? node["notes"].as<std::string>() : "";
            o.stage_descriptions_[idx(s)] = need(stages, name, "dentition_stages").as<std::string>();
        }
        const auto regions = need(root, "regions", "ontology");
        for (Region r : kRegions) {
            const auto node = need(regions, to_string(r), "regions");
            auto &cls = o.regions_[idx(r)];
            cls.description = node["description"] ? node["description"].as<std::string>() : "";
            cls.fdi = read_codes(need(node, "fdi", to_string(r)), to_string(r));
            if (node["subtypes"])
                for (const auto &kv : node["subtypes"])
                    cls.subtypes.emplace_back(kv.first.as<std::string>(), read_codes(kv.second, "subtype"));
        }
        const auto sizes = need(root, "sizes", "ontology");
        for (SizeClass s : kSizeClasses) {
            const auto node = need(sizes, to_string(s), "sizes");
            auto &cls = o.sizes_[idx(s)];
            cls.description = node["description"] ? node["description"].as<std::string>() : "";
            cls.fdi = read_codes(need(node, "fdi", to_string(s)), to_string(s));
        }
        const auto dregions = need(root, "deciduous_regions", "ontology");
        for (Region r : kRegions)
            o.deciduous_regions_[idx(r)] = read_codes(need(dregions, to_string(r), "deciduous_regions"), to_string(r));
        const auto dsizes = need(root, "deciduous_sizes", "ontology");
        for (SizeClass s : kSizeClasses)
            o.deciduous_sizes_[idx(s)] = read_codes(need(dsizes, to_string(s), "deciduous_sizes"), to_string(s));
        const auto rules = need(root, "special_rules", "ontology");
        for (const auto &r : rules) o.special_rules_.push_back(r.as<std::string>());
    } catch (const YAML::Exception &e) {
        throw OntologyInvalid(fmt::format("malformed ontology: {}", e.what()));
    }
    o.index();
    o.validate();
    return o;
}

std::string DentalOntology::to_yaml() const {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "tooth_count" << YAML::Value << YAML::BeginMap;
    for (DentitionStage s : kStages) {
        const auto &p = policies_[idx(s)];
        out << YAML::Key << to_string(s) << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "description" << YAML::Value << p.description;
        if (p.variable) out << YAML::Key << "variable" << YAML::Value << true;
        emit_range(out, "total", p.total);
        emit_range(out, "per_arch", p.per_arch);
        emit_range(out, "per_quadrant", p.per_quadrant);
        out << YAML::Key << "notes" << YAML::Value << p.notes;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;

    out << YAML::Key << "dentition_stages" << YAML::Value << YAML::BeginMap;
    for (DentitionStage s : kStages)
        out << YAML::Key << to_string(s) << YAML::Value << stage_descriptions_[idx(s)];
    out << YAML::EndMap;

    out << YAML::Key << "regions" << YAML::Value << YAML::BeginMap;
    for (Region r : kRegions) {
        const auto &cls = regions_[idx(r)];
        out << YAML::Key << to_string(r) << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "description" << YAML::Value << cls.description;
        out << YAML::Key << "fdi" << YAML::Value;
        emit_codes(out, cls.fdi);
        out << YAML::Key << "subtypes" << YAML::Value << YAML::BeginMap;
        for (const auto &[name, codes] : cls.subtypes) {
            out << YAML::Key << name << YAML::Value;
            emit_codes(out, codes);
        }
        out << YAML::EndMap << YAML::EndMap;
    }
    out << YAML::EndMap;

    out << YAML::Key << "sizes" << YAML::Value << YAML::BeginMap;
    for (SizeClass s : kSizeClasses) {
        const auto &cls = sizes_[idx(s)];
        out << YAML::Key << to_string(s) << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "description" << YAML::Value << cls.description;
        out << YAML::Key << "fdi" << YAML::Value;
        emit_codes(out, cls.fdi);
        out << YAML::EndMap;
    }
    out << YAML::EndMap;

    out << YAML::Key << "deciduous_regions" << YAML::Value << YAML::BeginMap;
    for (Region r : kRegions) {
        out << YAML::Key << to_string(r) << YAML::Value;
        emit_codes(out, deciduous_regions_[idx(r)]);
    }
    out << YAML::EndMap;
    out << YAML::Key << "deciduous_sizes" << YAML::Value << YAML::BeginMap;
    for (SizeClass s : kSizeClasses) {
        out << YAML::Key << to_string(s) << YAML::Value;
        emit_codes(out, deciduous_sizes_[idx(s)]);
    }
    out << YAML::EndMap;

    out << YAML::Key << "special_rules" << YAML::Value << YAML::BeginSeq;
    for (const auto &rule : special_rules_) out << rule;
    out << YAML::EndSeq;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::filesystem::path default_ontology_path() { return std::filesystem::path(ARCHMAP_DATA_DIR) / "dkb.yaml"; }

DentalOntology load_ontology(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(fmt::format("file not found: {}", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return DentalOntology::from_yaml(buffer.str());
}

void save_ontology(const std::filesystem::path &path, const DentalOntology &ontology) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FileNotFound(fmt::format("cannot open for writing: {}", path.string()));
    out << ontology.to_yaml();
}

std::string to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

std::vector<std::string> out_of_ontology_labels(const StructuredReport &report, const DentalOntology &ontology) {
    std::vector<std::string> out = report.unknown_labels;
    for (int code : report.fdi_present)
        if (!ontology.is_known(code)) out.push_back(fmt::format("fdi:{}", code));
    for (const auto &a : report.anomalies)
        if (a.fdi && !ontology.is_known(*a.fdi)) out.push_back(fmt::format("fdi:{}", *a.fdi));
    return out;
}

std::vector<Violation> validate_report(const StructuredReport &report, const DentalOntology &ontology) {
    struct Finding {
        std::vector<std::string> details;
        bool error = false;
        void add(std::string d, Severity s) {
            details.push_back(std::move(d));
            error = error || s == Severity::Error;
        }
    };
    std::map<std::string_view, Finding> found;
    auto flag = [&](std::string_view rule, std::string detail, Severity s) { found[rule].add(std::move(detail), s); };

    const std::set<int> present(report.fdi_present.begin(), report.fdi_present.end());
    bool arch_known = true, stage_known = true;
    for (const auto &label : report.unknown_labels) {
        if (label.starts_with("arch:")) {
            arch_known = false;
            flag("fdi-validity", fmt::format("arch label '{}' is not upper/lower", label.substr(5)), Severity::Error);
        } else if (label.starts_with("stage:")) {
            stage_known = false;
            flag("morphology-stage", fmt::format("dentition stage '{}' is not in the ontology", label.substr(6)),
                 Severity::Error);
        } else if (label.starts_with("region:") || label.starts_with("size:")) {
            flag("count-consistency", fmt::format("count key '{}' is not in the ontology", label), Severity::Error);
        } else if (label.starts_with("anomaly:")) {
            flag("positional-annotation", fmt::format("anomaly kind '{}' is not in the ontology", label.substr(8)),
                 Severity::Error);
        }
    }

    // conditional inclusion of third molars
    std::vector<int> third_molars;
    for (int code : present)
        if (position(code) == 8 && ontology.is_permanent(code)) third_molars.push_back(code);
    if (!third_molars.empty() && !report.third_molar_evidence)
        flag("conditional-inclusion",
             fmt::format("third molars {} listed without visual evidence", fmt::join(third_molars, ",")),
             Severity::Error);

    // FDI validity: known code on the declared arch
    bool codes_known = true;
    for (int code : present) {
        if (!ontology.is_known(code)) {
            codes_known = false;
            flag("fdi-validity", fmt::format("FDI {} is not a valid code", code), Severity::Error);
        } else if (arch_known && upper_quadrant(quadrant(code)) != (report.arch == ArchSide::Maxillary)) {
            flag("fdi-validity", fmt::format("FDI {} belongs to the opposite arch", code), Severity::Error);
        }
    }

    // numbering continuity within each quadrant; a deciduous code fills the
    // position of its permanent successor
    std::set<int> documented;
    for (const auto &a : report.anomalies)
        if (a.fdi) documented.insert(*a.fdi);
    for (int q = 1; q <= 4; ++q) {
        std::set<int> positions;
        for (int code : present) {
            if (!ontology.is_known(code)) continue;
            if (quadrant(code) == q || quadrant(code) == q + 4) positions.insert(position(code));
        }
        if (positions.empty()) continue;
        const int top = *positions.rbegin();
        for (int p = 1; p < top; ++p) {
            if (positions.contains(p)) continue;
            const int perm = 10 * q + p, prim = 10 * (q + 4) + p;
            if (documented.contains(perm) || (p <= 5 && documented.contains(prim))) continue;
            flag("numbering-continuity", fmt::format("FDI {} absent with no anomaly entry", perm), Severity::Error);
        }
    }

    // count consistency
    if (!present.empty() && report.teeth_number != static_cast<int>(present.size()))
        flag("count-consistency",
             fmt::format("teeth_number {} but {} FDI codes listed", report.teeth_number, present.size()),
             Severity::Error);
    if (report.anatomical_counts && report.anatomical_counts->sum() != report.teeth_number)
        flag("count-consistency",
             fmt::format("anatomical counts sum to {}, teeth_number {}", report.anatomical_counts->sum(),
                         report.teeth_number),
             Severity::Error);
    if (report.size_counts && report.size_counts->sum() != report.teeth_number)
        flag("count-consistency",
             fmt::format("size counts sum to {}, teeth_number {}", report.size_counts->sum(), report.teeth_number),
             Severity::Error);
    if (!present.empty() && codes_known) {
        RegionCounts regions;
        SizeCounts sizes;
        for (int code : present) {
            switch (ontology.region_of(code)) {
            case Region::Anterior: ++regions.anterior; break;
            case Region::Premolar: ++regions.premolar; break;
            case Region::Molar: ++regions.molar; break;
            }
            switch (ontology.size_of(code)) {
            case SizeClass::Large: ++sizes.large; break;
            case SizeClass::Medium: ++sizes.medium; break;
            case SizeClass::Small: ++sizes.small; break;
            }
        }
        if (report.anatomical_counts && !(*report.anatomical_counts == regions))
            flag("count-consistency", "anatomical counts disagree with the listed FDI codes", Severity::Error);
        if (report.size_counts && !(*report.size_counts == sizes))
            flag("count-consistency", "size counts disagree with the listed FDI codes", Severity::Error);
    }

    // stage count range on one arch; documented missing or extracted teeth
    // are credited back
    if (stage_known) {
        const auto &policy = ontology.expected_counts(report.dentition_stage);
        std::set<int> absent;
        for (const auto &a : report.anomalies)
            if (a.fdi && (a.kind == AnomalyKind::Missing || a.kind == AnomalyKind::Extracted) &&
                !present.contains(*a.fdi))
                absent.insert(*a.fdi);
        const int credited = report.teeth_number + static_cast<int>(absent.size());
        if (!policy.per_arch.contains(credited))
            flag("stage-count-range",
                 fmt::format("{} teeth (with {} documented absent) outside [{}, {}] for {} dentition", credited,
                             absent.size(), policy.per_arch.min, policy.per_arch.max,
                             to_string(report.dentition_stage)),
                 policy.variable ? Severity::Warning : Severity::Error);
    }

    // positional annotation
    for (const auto &a : report.anomalies) {
        if (a.kind != AnomalyKind::Extracted || !a.unknown_kind.empty()) continue;
        if (a.position.find_first_not_of(" \t\r\n") == std::string::npos)
            flag("positional-annotation",
                 a.fdi ? fmt::format("extraction of FDI {} lacks a position", *a.fdi)
                       : std::string("extraction lacks a position"),
                 Severity::Warning);
    }

    // morphology vs stage: the deciduous/permanent mix must match the stage
    if (stage_known && !present.empty()) {
        const bool any_primary = std::any_of(present.begin(), present.end(),
                                             [&](int c) { return ontology.is_deciduous(c); });
        const bool any_permanent = std::any_of(present.begin(), present.end(),
                                               [&](int c) { return ontology.is_permanent(c); });
        switch (report.dentition_stage) {
        case DentitionStage::Permanent:
            if (any_primary) flag("morphology-stage", "permanent stage with deciduous codes", Severity::Warning);
            break;
        case DentitionStage::Deciduous:
            if (any_permanent) flag("morphology-stage", "deciduous stage with permanent codes", Severity::Warning);
            break;
        case DentitionStage::Mixed:
            if (!(any_primary && any_permanent))
                flag("morphology-stage", "mixed stage without both deciduous and permanent codes",
                     Severity::Warning);
            break;
        }
    }

    std::vector<Violation> out;
    for (auto rule : kRuleIds) {
        auto it = found.find(rule);
        if (it == found.end()) continue;
        out.push_back({std::string(rule), it->second.error ? Severity::Error : Severity::Warning,
                       join(it->second.details)});
    }
    return out;
}

nlohmann::ordered_json report_schema(const DentalOntology &ontology) {
    using oj = nlohmann::ordered_json;
    std::vector<int> codes = DentalOntology::valid_fdi();
    const auto deciduous = DentalOntology::deciduous_fdi();
    codes.insert(codes.end(), deciduous.begin(), deciduous.end());
    (void)ontology;

    auto count = [] { return oj{{"type", "integer"}, {"minimum", 0}}; };
    auto counts_object = [&](const std::vector<std::string> &keys) {
        oj props = oj::object();
        for (const auto &k : keys) props[k] = count();
        return oj{{"type", "object"}, {"properties", props}, {"required", keys}, {"additionalProperties", false}};
    };
    std::vector<std::string> kinds;
    for (auto k : kAnomalyKinds) kinds.push_back(to_string(k));

    oj props = oj::object();
    props["arch"] = {{"type", "string"}, {"enum", {"upper", "lower"}}};
    props["teeth_number"] = count();
    props["fdi_present"] = {{"type", "array"}, {"items", {{"type", "integer"}, {"enum", codes}}}, {"uniqueItems", true}};
    props["third_molar_evidence"] = {{"type", "boolean"}};
    props["anatomical_counts"] = counts_object({"anterior", "premolar", "molar"});
    props["size_counts"] = counts_object({"large", "medium", "small"});
    props["dentition_stage"] = {{"type", "string"}, {"enum", {"deciduous", "mixed", "permanent"}}};
    props["anomalies"] = {
        {"type", "array"},
        {"items",
         {{"type", "object"},
          {"properties",
           {{"kind", {{"type", "string"}, {"enum", kinds}}},
            {"fdi", {{"type", {"integer", "null"}}}},
            {"position", {{"type", "string"}}},
            {"note", {{"type", "string"}}}}},
          {"required", {"kind", "fdi", "position", "note"}},
          {"additionalProperties", false}}}};
    props["special_conditions"] = {{"type", "array"}, {"items", {{"type", "string"}}}};
    props["notes"] = {{"type", "string"}};

    std::vector<std::string> required;
    for (const auto &item : props.items()) required.push_back(item.key());
    return oj{{"$schema", "https://json-schema.org/draft/2020-12/schema"},
              {"title", "ArchReport"},
              {"type", "object"},
              {"properties", props},
              {"required", required},
              {"additionalProperties", false}};
}

namespace {

std::string arch_declaration(ArchSide side) {
    const bool upper = side == ArchSide::Maxillary;
    return fmt::format("The three images show the {} ({}) dental arch only. Report on this arch alone; "
                       "the opposite arch is not shown. Set \"arch\" to \"{}\".",
                       upper ? "upper" : "lower", upper ? "maxillary" : "mandibular", to_string(side));
}

std::string schema_block(const nlohmann::ordered_json &schema) {
    return fmt::format("Reply with a single JSON object that conforms to this schema, with no other text:\n{}\n",
                       schema.dump(2));
}

} // namespace

std::string render_prompt(const DentalOntology &o, ArchSide side, const nlohmann::ordered_json &schema) {
    std::string p;
    auto line = [&p](std::string_view text) {
        p += text;
        p += '\n';
    };
    line("You are given three standardized renders of a flattened dental arch scan, in the order front, back, "
         "bottom. Analyze them in five stages, in order, and fill the matching fields of the output.");
    line("");
    line("Stage 1, tooth counting: count the teeth actually visible and list their FDI codes "
         "(teeth_number, fdi_present, third_molar_evidence).");
    line("Stage 2, anatomical classification: count anterior, premolar and molar teeth (anatomical_counts).");
    line("Stage 3, size classification: count large, medium and small teeth (size_counts).");
    line("Stage 4, dentition stage: classify as deciduous, mixed or permanent (dentition_stage).");
    line("Stage 5, clinical conditions: record missing, extracted or supernumerary teeth and other findings "
         "with FDI code or arch position (anomalies, special_conditions, notes).");
    line("");
    line("Dental knowledge base");
    line("");
    line("Tooth count by dentition stage:");
    for (DentitionStage s : {DentitionStage::Deciduous, DentitionStage::Mixed, DentitionStage::Permanent}) {
        const auto &c = o.expected_counts(s);
        p += fmt::format("- {}: total {}-{}, per arch {}-{}, per quadrant {}-{}{}. {} {}\n", to_string(s), c.total.min,
                         c.total.max, c.per_arch.min, c.per_arch.max, c.per_quadrant.min, c.per_quadrant.max,
                         c.variable ? " (variable)" : "", c.description, c.notes);
    }
    line("");
    line("Dentition stages:");
    for (DentitionStage s : {DentitionStage::Deciduous, DentitionStage::Mixed, DentitionStage::Permanent})
        p += fmt::format("- {}: {}\n", to_string(s), o.stage_description(s));
    line("");
    line("Anatomical classification (FDI):");
    for (Region r : kRegions) {
        const auto &cls = o.region_class(r);
        p += fmt::format("- {}: {} FDI {}\n", to_string(r), cls.description, fmt::join(cls.fdi, ", "));
        for (const auto &[name, codes] : cls.subtypes) p += fmt::format("  - {}: {}\n", name, fmt::join(codes, ", "));
    }
    line("");
    line("Size classification (FDI):");
    for (SizeClass s : kSizeClasses) {
        const auto &cls = o.size_class(s);
        p += fmt::format("- {}: {} FDI {}\n", to_string(s), cls.description, fmt::join(cls.fdi, ", "));
    }
    line("");
    line("Deciduous teeth use quadrants 5-8, positions 1-5 (e.g. 51-55).");
    line("");
    line("Special rules:");
    for (std::size_t i = 0; i < o.special_rules().size(); ++i)
        p += fmt::format("{}. {}\n", i + 1, o.special_rules()[i]);
    line("");
    line(arch_declaration(side));
    line("");
    p += schema_block(schema);
    return p;
}

std::string minimal_prompt(ArchSide side, const nlohmann::ordered_json &schema) {
    std::string p = "You are given three renders of a dental arch scan, in the order front, back, bottom. "
                    "Describe the visible teeth.\n\n";
    p += arch_declaration(side);
    p += "\n\n";
    p += schema_block(schema);
    return p;
}

} // namespace archmap
