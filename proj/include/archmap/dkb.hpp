#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "archmap/report.hpp"

namespace archmap {

struct CountRange {
    int min = 0, max = 0;
    bool contains(int n) const { return n >= min && n <= max; }
    bool operator==(const CountRange &) const = default;
};

struct CountPolicy {
    std::string description;
    bool variable = false;
    CountRange total, per_arch, per_quadrant;
    std::string notes;
    bool operator==(const CountPolicy &) const = default;
};

struct CodeClass {
    std::string description;
    std::vector<int> fdi;
    std::vector<std::pair<std::string, std::vector<int>>> subtypes;
    bool operator==(const CodeClass &) const = default;
};

/// Dental knowledge base: count policies per dentition stage, the FDI region
/// and size partitions, and the image-numbering rules. Immutable after load.
class DentalOntology {
public:
    DentalOntology() = default;

    /// Checks every invariant; throws OntologyInvalid on the first failure.
    void validate() const;

    Region region_of(int fdi) const;
    SizeClass size_of(int fdi) const;
    const CountPolicy &expected_counts(DentitionStage stage) const;

    bool is_permanent(int fdi) const { return region_map_.contains(fdi); }
    bool is_deciduous(int fdi) const { return deciduous_region_map_.contains(fdi); }
    bool is_known(int fdi) const { return is_permanent(fdi) || is_deciduous(fdi); }

    /// {11..18, 21..28, 31..38, 41..48}
    static std::vector<int> valid_fdi();
    /// {51..55, 61..65, 71..75, 81..85}
    static std::vector<int> deciduous_fdi();

    const std::vector<std::string> &special_rules() const { return special_rules_; }
    const std::string &stage_description(DentitionStage stage) const;
    const CodeClass &region_class(Region r) const { return regions_.at(static_cast<std::size_t>(r)); }
    const CodeClass &size_class(SizeClass s) const { return sizes_.at(static_cast<std::size_t>(s)); }

    static DentalOntology from_yaml(const std::string &text);
    std::string to_yaml() const;

    bool operator==(const DentalOntology &) const = default;

private:
    std::array<CountPolicy, 3> policies_;
    std::array<std::string, 3> stage_descriptions_;
    std::array<CodeClass, 3> regions_;
    std::array<CodeClass, 3> sizes_;
    std::array<std::vector<int>, 3> deciduous_regions_;
    std::array<std::vector<int>, 3> deciduous_sizes_;
    std::vector<std::string> special_rules_;

    std::map<int, Region> region_map_, deciduous_region_map_;
    std::map<int, SizeClass> size_map_, deciduous_size_map_;

    void index();
};

/// Bundled ontology file shipped with the library.
std::filesystem::path default_ontology_path();
DentalOntology load_ontology(const std::filesystem::path &path = default_ontology_path());
void save_ontology(const std::filesystem::path &path, const DentalOntology &ontology);

enum class Severity { Error, Warning };
std::string to_string(Severity s);

inline constexpr std::array<std::string_view, 7> kRuleIds{
    "conditional-inclusion", "numbering-continuity", "morphology-stage", "positional-annotation",
    "count-consistency",     "fdi-validity",         "stage-count-range"};

struct Violation {
    std::string rule_id;
    Severity severity = Severity::Error;
    std::string detail;
    bool operator==(const Violation &) const = default;
};

/// At most one violation per failed rule, in kRuleIds order. A rule is an
/// error if any of its failed checks is an error.
std::vector<Violation> validate_report(const StructuredReport &report, const DentalOntology &ontology);

/// Labels outside the closed vocabularies: the recorded unknown strings plus
/// FDI codes the ontology does not know ("fdi:<code>").
std::vector<std::string> out_of_ontology_labels(const StructuredReport &report, const DentalOntology &ontology);

/// JSON Schema of the report; enums drawn from the ontology.
nlohmann::ordered_json report_schema(const DentalOntology &ontology);

/// Full prompt: five ordered stage instructions, ontology tables, the special
/// rules verbatim, the arch declaration and the output schema.
std::string render_prompt(const DentalOntology &ontology, ArchSide side, const nlohmann::ordered_json &schema);

/// Task statement, arch declaration and schema only.
std::string minimal_prompt(ArchSide side, const nlohmann::ordered_json &schema);

} // namespace archmap
