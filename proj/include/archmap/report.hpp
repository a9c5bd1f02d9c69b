#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "archmap/render.hpp"

namespace archmap {

enum class Region { Anterior, Premolar, Molar };
enum class SizeClass { Large, Medium, Small };
enum class DentitionStage { Deciduous, Mixed, Permanent };
enum class AnomalyKind { Missing, Extracted, Supernumerary, Denture, Caries, Crowding, Malocclusion, Other };

std::string to_string(Region r);
std::string to_string(SizeClass s);
std::string to_string(DentitionStage s);
std::string to_string(AnomalyKind k);
std::optional<Region> parse_region(std::string_view text);
std::optional<SizeClass> parse_size_class(std::string_view text);
std::optional<DentitionStage> parse_stage(std::string_view text);
std::optional<AnomalyKind> parse_anomaly_kind(std::string_view text);

inline constexpr std::array<Region, 3> kRegions{Region::Anterior, Region::Premolar, Region::Molar};
inline constexpr std::array<SizeClass, 3> kSizeClasses{SizeClass::Large, SizeClass::Medium, SizeClass::Small};
inline constexpr std::array<AnomalyKind, 8> kAnomalyKinds{
    AnomalyKind::Missing, AnomalyKind::Extracted, AnomalyKind::Supernumerary, AnomalyKind::Denture,
    AnomalyKind::Caries,  AnomalyKind::Crowding,  AnomalyKind::Malocclusion,  AnomalyKind::Other};

struct RegionCounts {
    int anterior = 0, premolar = 0, molar = 0;
    int sum() const { return anterior + premolar + molar; }
    int get(Region r) const;
    bool operator==(const RegionCounts &) const = default;
};

struct SizeCounts {
    int large = 0, medium = 0, small = 0;
    int sum() const { return large + medium + small; }
    int get(SizeClass s) const;
    bool operator==(const SizeCounts &) const = default;
};

struct Anomaly {
    AnomalyKind kind = AnomalyKind::Other;
    std::optional<int> fdi;
    std::string position; // arch-level / spatial description
    std::string note;
    std::string unknown_kind; // verbatim kind when outside the vocabulary
    bool operator==(const Anomaly &) const = default;
};

/// Schema-constrained report for one arch. Labels outside the closed
/// vocabularies are not representable by the enums; they are preserved
/// verbatim in `unknown_labels` ("field:value") and the enum keeps a
/// placeholder.
struct StructuredReport {
    ArchSide arch = ArchSide::Maxillary;
    int teeth_number = 0;
    std::vector<int> fdi_present; // sorted, unique
    bool third_molar_evidence = false;
    std::optional<RegionCounts> anatomical_counts;
    std::optional<SizeCounts> size_counts;
    DentitionStage dentition_stage = DentitionStage::Permanent;
    std::vector<Anomaly> anomalies;
    std::vector<std::string> special_conditions;
    std::string notes;
    std::vector<std::string> unknown_labels;

    bool operator==(const StructuredReport &) const = default;
};

/// Canonical JSON form (field order follows the five reasoning stages).
nlohmann::ordered_json to_json(const StructuredReport &report);

/// Structural conversion from an already-parsed JSON value. Returns nullopt
/// and fills `errors` when required keys are missing or mistyped; labels
/// outside the vocabularies are recorded, not rejected.
std::optional<StructuredReport> report_from_json(const nlohmann::json &value, std::vector<std::string> &errors);

} // namespace archmap
