#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "archmap/dkb.hpp"
#include "archmap/report.hpp"
#include "archmap/vlm_infer.hpp"

namespace archmap {

double abs_err(double pred, double gt);

struct RelErrAcc {
    double re = 0.0;  // percent
    double acc = 0.0; // percent, floored at 0
};
/// Throws ZeroGroundTruth when gt == 0.
RelErrAcc rel_err_acc(double pred, double gt);

/// Sign partition of pred - gt: positive deviations feed Over, negative
/// magnitudes feed Under, each as a percentage of gt averaged over its own
/// subset.
class SignedDeviation {
public:
    void add(double pred, double gt);
    double over() const;  // 0 when the subset is empty
    double under() const;
    const std::vector<double> &over_samples() const { return over_; }
    const std::vector<double> &under_samples() const { return under_; }

private:
    std::vector<double> over_, under_;
};

struct ClassCounts {
    long tp = 0, fp = 0, fn = 0;
};

struct ConfusionTable {
    std::vector<std::string> classes;
    std::vector<ClassCounts> counts; // parallel to classes
};

/// Mean per-class F1 in percent; a class with no predictions, no ground
/// truth or P + R == 0 contributes 0.
double macro_f1(const ConfusionTable &table);

/// Percentage of exact matches. Throws LengthMismatch for unequal or empty
/// inputs.
double stage_acc(const std::vector<DentitionStage> &pred, const std::vector<DentitionStage> &gt);

struct DetectionCounts {
    double pred = 0, gt = 0, ae = 0, re = 0;
};
/// Pred = TP+FP, GT = TP+FN, AE = |FP-FN|, RE = 100 AE / GT. Throws
/// ZeroGroundTruth when TP+FN == 0.
DetectionCounts map_detection_counts(long tp, long fp, long fn);

/// Percentage of json-valid outcomes carrying an out-of-ontology label.
/// Throws NoValidReports when no outcome is json-valid.
double hallucination_rate(const std::vector<InferenceOutcome> &outcomes, const DentalOntology &ontology);

/// Six partition classes (three regions, three sizes). Per class, with both
/// code lists available TP/FP/FN come from set overlap; otherwise from the
/// counts (TP = min, the excess on either side becomes FP or FN).
ConfusionTable partition_confusion(const StructuredReport &pred, const StructuredReport &gt,
                                   const DentalOntology &ontology);

struct Stat {
    double mean = 0.0;
    double std = 0.0; // sample (n-1); 0 for a single value
    std::size_t n = 0;
};
/// nullopt for an empty sample.
std::optional<Stat> summarize(const std::vector<double> &values);

inline constexpr std::array<const char *, 9> kMetricNames{"AE",      "RE",       "Acc",      "Over",  "Under",
                                                          "MacroF1", "StageAcc", "JsonValid", "Halluc"};

/// Per-arch evaluation record.
struct CaseMetrics {
    std::string case_id;
    ArchSide arch = ArchSide::Maxillary;
    bool failed = false;     // no reply at all (pipeline error)
    bool json_valid = false;
    bool excluded_gt0 = false;
    std::optional<int> pred_teeth, gt_teeth;
    std::optional<DentitionStage> pred_stage, gt_stage;
    std::optional<RegionCounts> pred_regions, gt_regions;
    std::optional<SizeCounts> pred_sizes, gt_sizes;
    /// Indexed like kMetricNames; nullopt where undefined.
    std::array<std::optional<double>, 9> values;
};

CaseMetrics case_metrics(std::string case_id, ArchSide arch, const InferenceOutcome *outcome,
                         const StructuredReport &gt, const DentalOntology &ontology);

struct MetricSummary {
    std::string group; // upper | lower | all
    std::size_t records = 0;
    std::size_t excluded_gt0 = 0;
    std::size_t failed = 0;
    std::array<std::optional<Stat>, 9> metrics;
};

/// "upper"/"lower" summarize arch records; "all" first averages each case's
/// arches, then summarizes over cases. Input order does not matter.
MetricSummary aggregate(const std::vector<CaseMetrics> &records, const std::string &group);

/// Writes metrics.csv, metrics.json, categories.csv and per_case.csv.
void write_metric_files(const std::filesystem::path &outdir, const std::vector<CaseMetrics> &records,
                        const std::string &variant_name);

/// Fixed six-decimal rendering used in every CSV; empty when undefined.
std::string csv_number(std::optional<double> value);

} // namespace archmap
