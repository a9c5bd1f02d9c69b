#include "archmap/report.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace archmap {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_from(std::string_view text, const std::array<Enum, N> &values) {
    for (Enum v : values)
        if (to_string(v) == text) return v;
    return std::nullopt;
}

using json = nlohmann::json;

bool require(const json &obj, const char *key, json::value_t type, std::vector<std::string> &errors) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        errors.push_back(fmt::format("missing key '{}'", key));
        return false;
    }
    const auto t = it->type();
    const bool ok = type == json::value_t::number_integer
                        ? (t == json::value_t::number_integer || t == json::value_t::number_unsigned)
                        : t == type;
    if (!ok) errors.push_back(fmt::format("key '{}' has type {}", key, it->type_name()));
    return ok;
}

bool is_integer(const json &v) { return v.is_number_integer(); }

} // namespace

std::string to_string(Region r) {
    switch (r) {
    case Region::Anterior: return "anterior";
    case Region::Premolar: return "premolar";
    case Region::Molar: return "molar";
    }
    return "?";
}

std::string to_string(SizeClass s) {
    switch (s) {
    case SizeClass::Large: return "large";
    case SizeClass::Medium: return "medium";
    case SizeClass::Small: return "small";
    }
    return "?";
}

std::string to_string(DentitionStage s) {
    switch (s) {
    case DentitionStage::Deciduous: return "deciduous";
    case DentitionStage::Mixed: return "mixed";
    case DentitionStage::Permanent: return "permanent";
    }
    return "?";
}

std::string to_string(AnomalyKind k) {
    switch (k) {
    case AnomalyKind::Missing: return "missing";
    case AnomalyKind::Extracted: return "extracted";
    case AnomalyKind::Supernumerary: return "supernumerary";
    case AnomalyKind::Denture: return "denture";
    case AnomalyKind::Caries: return "caries";
    case AnomalyKind::Crowding: return "crowding";
    case AnomalyKind::Malocclusion: return "malocclusion";
    case AnomalyKind::Other: return "other";
    }
    return "?";
}

std::optional<Region> parse_region(std::string_view text) { return parse_from(text, kRegions); }
std::optional<SizeClass> parse_size_class(std::string_view text) { return parse_from(text, kSizeClasses); }
std::optional<DentitionStage> parse_stage(std::string_view text) {
    return parse_from(text, std::array{DentitionStage::Deciduous, DentitionStage::Mixed, DentitionStage::Permanent});
}
std::optional<AnomalyKind> parse_anomaly_kind(std::string_view text) { return parse_from(text, kAnomalyKinds); }

int RegionCounts::get(Region r) const {
    switch (r) {
    case Region::Anterior: return anterior;
    case Region::Premolar: return premolar;
    case Region::Molar: return molar;
    }
    return 0;
}

int SizeCounts::get(SizeClass s) const {
    switch (s) {
    case SizeClass::Large: return large;
    case SizeClass::Medium: return medium;
    case SizeClass::Small: return small;
    }
    return 0;
}

nlohmann::ordered_json to_json(const StructuredReport &r) {
    nlohmann::ordered_json j;
    // arch label survives verbatim when it was outside the vocabulary
    std::string arch = to_string(r.arch);
    std::string stage = to_string(r.dentition_stage);
    for (const auto &label : r.unknown_labels) {
        if (label.starts_with("arch:")) arch = label.substr(5);
        if (label.starts_with("stage:")) stage = label.substr(6);
    }
    j["arch"] = arch;
    j["teeth_number"] = r.teeth_number;
    j["fdi_present"] = r.fdi_present;
    j["third_molar_evidence"] = r.third_molar_evidence;
    if (r.anatomical_counts) {
        j["anatomical_counts"] = {{"anterior", r.anatomical_counts->anterior},
                                  {"premolar", r.anatomical_counts->premolar},
                                  {"molar", r.anatomical_counts->molar}};
    } else {
        j["anatomical_counts"] = nullptr;
    }
    if (r.size_counts) {
        j["size_counts"] = {
            {"large", r.size_counts->large}, {"medium", r.size_counts->medium}, {"small", r.size_counts->small}};
    } else {
        j["size_counts"] = nullptr;
    }
    for (const auto &label : r.unknown_labels) {
        const auto colon = label.find(':');
        const auto field = label.substr(0, colon);
        const auto rest = label.substr(colon + 1);
        const auto eq = rest.rfind('=');
        if (field == "region" && r.anatomical_counts && eq != std::string::npos)
            j["anatomical_counts"][rest.substr(0, eq)] = std::stoi(rest.substr(eq + 1));
        if (field == "size" && r.size_counts && eq != std::string::npos)
            j["size_counts"][rest.substr(0, eq)] = std::stoi(rest.substr(eq + 1));
    }
    j["dentition_stage"] = stage;
    auto anomalies = nlohmann::ordered_json::array();
    for (const auto &a : r.anomalies) {
        nlohmann::ordered_json e;
        e["kind"] = a.unknown_kind.empty() ? to_string(a.kind) : a.unknown_kind;
        if (a.fdi) e["fdi"] = *a.fdi;
        else e["fdi"] = nullptr;
        e["position"] = a.position;
        e["note"] = a.note;
        anomalies.push_back(std::move(e));
    }
    j["anomalies"] = std::move(anomalies);
    j["special_conditions"] = r.special_conditions;
    j["notes"] = r.notes;
    return j;
}

std::optional<StructuredReport> report_from_json(const json &v, std::vector<std::string> &errors) {
    const std::size_t before = errors.size();
    if (!v.is_object()) {
        errors.push_back(fmt::format("top level is {}, expected object", v.type_name()));
        return std::nullopt;
    }
    StructuredReport r;

    if (require(v, "arch", json::value_t::string, errors)) {
        const auto text = v["arch"].get<std::string>();
        if (text == "upper") r.arch = ArchSide::Maxillary;
        else if (text == "lower") r.arch = ArchSide::Mandibular;
        else r.unknown_labels.push_back("arch:" + text);
    }
    if (require(v, "teeth_number", json::value_t::number_integer, errors)) r.teeth_number = v["teeth_number"].get<int>();
    if (require(v, "fdi_present", json::value_t::array, errors)) {
        for (const auto &code : v["fdi_present"]) {
            if (!is_integer(code)) {
                errors.push_back("fdi_present holds a non-integer entry");
                continue;
            }
            r.fdi_present.push_back(code.get<int>());
        }
        std::sort(r.fdi_present.begin(), r.fdi_present.end());
        r.fdi_present.erase(std::unique(r.fdi_present.begin(), r.fdi_present.end()), r.fdi_present.end());
    }
    if (require(v, "third_molar_evidence", json::value_t::boolean, errors))
        r.third_molar_evidence = v["third_molar_evidence"].get<bool>();

    auto read_counts = [&](const char *key, auto names, auto &target, const char *label) {
        auto it = v.find(key);
        if (it == v.end()) {
            errors.push_back(fmt::format("missing key '{}'", key));
            return;
        }
        if (it->is_null()) return;
        if (!it->is_object()) {
            errors.push_back(fmt::format("key '{}' has type {}", key, it->type_name()));
            return;
        }
        typename std::remove_reference_t<decltype(target)>::value_type counts;
        for (const auto &[name, value] : it->items()) {
            if (!is_integer(value)) {
                errors.push_back(fmt::format("{}.{} is not an integer", key, name));
                continue;
            }
            const int n = value.template get<int>();
            bool known = false;
            for (const auto &[known_name, slot] : names(counts)) {
                if (name == known_name) {
                    *slot = n;
                    known = true;
                }
            }
            if (!known) r.unknown_labels.push_back(fmt::format("{}:{}={}", label, name, n));
        }
        target = counts;
    };
    read_counts(
        "anatomical_counts",
        [](RegionCounts &c) {
            return std::array<std::pair<std::string_view, int *>, 3>{
                {{"anterior", &c.anterior}, {"premolar", &c.premolar}, {"molar", &c.molar}}};
        },
        r.anatomical_counts, "region");
    read_counts(
        "size_counts",
        [](SizeCounts &c) {
            return std::array<std::pair<std::string_view, int *>, 3>{
                {{"large", &c.large}, {"medium", &c.medium}, {"small", &c.small}}};
        },
        r.size_counts, "size");

    if (require(v, "dentition_stage", json::value_t::string, errors)) {
        const auto text = v["dentition_stage"].get<std::string>();
        if (auto s = parse_stage(text)) r.dentition_stage = *s;
        else r.unknown_labels.push_back("stage:" + text);
    }
    if (require(v, "anomalies", json::value_t::array, errors)) {
        for (const auto &e : v["anomalies"]) {
            if (!e.is_object() || !e.contains("kind") || !e["kind"].is_string()) {
                errors.push_back("anomaly entry without a string 'kind'");
                continue;
            }
            Anomaly a;
            const auto kind = e["kind"].get<std::string>();
            if (auto k = parse_anomaly_kind(kind)) a.kind = *k;
            else {
                a.unknown_kind = kind;
                r.unknown_labels.push_back("anomaly:" + kind);
            }
            if (auto it = e.find("fdi"); it != e.end() && !it->is_null()) {
                if (is_integer(*it)) a.fdi = it->get<int>();
                else errors.push_back("anomaly fdi is not an integer");
            }
            if (auto it = e.find("position"); it != e.end() && it->is_string()) a.position = it->get<std::string>();
            if (auto it = e.find("note"); it != e.end() && it->is_string()) a.note = it->get<std::string>();
            r.anomalies.push_back(std::move(a));
        }
    }
    if (require(v, "special_conditions", json::value_t::array, errors)) {
        for (const auto &s : v["special_conditions"]) {
            if (s.is_string()) r.special_conditions.push_back(s.get<std::string>());
            else errors.push_back("special_conditions holds a non-string entry");
        }
    }
    if (require(v, "notes", json::value_t::string, errors)) r.notes = v["notes"].get<std::string>();

    if (errors.size() != before) return std::nullopt;
    return r;
}

} // namespace archmap
