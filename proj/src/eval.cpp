#include "archmap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

namespace archmap {

double abs_err(double pred, double gt) { return std::abs(pred - gt); }

RelErrAcc rel_err_acc(double pred, double gt) {
    if (gt == 0.0) throw ZeroGroundTruth("relative error is undefined for a ground truth of 0");
    const double ratio = std::abs(pred - gt) / gt;
    return {100.0 * ratio, 100.0 * std::max(0.0, 1.0 - ratio)};
}

void SignedDeviation::add(double pred, double gt) {
    if (gt == 0.0) throw ZeroGroundTruth("signed deviation is undefined for a ground truth of 0");
    const double dev = pred - gt;
    if (dev > 0) over_.push_back(100.0 * dev / gt);
    else if (dev < 0) under_.push_back(-100.0 * dev / gt);
}

namespace {

double mean_or_zero(const std::vector<double> &v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

double SignedDeviation::over() const { return mean_or_zero(over_); }
double SignedDeviation::under() const { return mean_or_zero(under_); }

double macro_f1(const ConfusionTable &table) {
    if (table.counts.empty()) return 0.0;
    double total = 0.0;
    for (const auto &c : table.counts) {
        if (c.tp + c.fp == 0 || c.tp + c.fn == 0) continue;
        const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
        const double r = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        if (p + r == 0.0) continue;
        total += 2.0 * p * r / (p + r);
    }
    return 100.0 * total / static_cast<double>(table.counts.size());
}

double stage_acc(const std::vector<DentitionStage> &pred, const std::vector<DentitionStage> &gt) {
    if (pred.size() != gt.size())
        throw LengthMismatch(fmt::format("{} predicted stages vs {} ground-truth stages", pred.size(), gt.size()));
    if (pred.empty()) throw LengthMismatch("no stages to compare");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gt[i];
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

DetectionCounts map_detection_counts(long tp, long fp, long fn) {
    if (tp + fn == 0) throw ZeroGroundTruth("TP + FN is 0");
    DetectionCounts d;
    d.pred = static_cast<double>(tp + fp);
    d.gt = static_cast<double>(tp + fn);
    d.ae = static_cast<double>(std::labs(fp - fn));
    d.re = 100.0 * d.ae / d.gt;
    return d;
}

double hallucination_rate(const std::vector<InferenceOutcome> &outcomes, const DentalOntology &ontology) {
    std::size_t valid = 0, offending = 0;
    for (const auto &o : outcomes) {
        if (!o.json_valid || !o.report) continue;
        ++valid;
        offending += !out_of_ontology_labels(*o.report, ontology).empty();
    }
    if (valid == 0) throw NoValidReports("no json-valid reports");
    return 100.0 * static_cast<double>(offending) / static_cast<double>(valid);
}

namespace {

std::optional<RegionCounts> regions_of(const StructuredReport &r, const DentalOntology &o) {
    if (r.anatomical_counts) return r.anatomical_counts;
    if (r.fdi_present.empty()) return std::nullopt;
    RegionCounts c;
    for (int code : r.fdi_present) {
        if (!o.is_known(code)) continue;
        switch (o.region_of(code)) {
        case Region::Anterior: ++c.anterior; break;
        case Region::Premolar: ++c.premolar; break;
        case Region::Molar: ++c.molar; break;
        }
    }
    return c;
}

std::optional<SizeCounts> sizes_of(const StructuredReport &r, const DentalOntology &o) {
    if (r.size_counts) return r.size_counts;
    if (r.fdi_present.empty()) return std::nullopt;
    SizeCounts c;
    for (int code : r.fdi_present) {
        if (!o.is_known(code)) continue;
        switch (o.size_of(code)) {
        case SizeClass::Large: ++c.large; break;
        case SizeClass::Medium: ++c.medium; break;
        case SizeClass::Small: ++c.small; break;
        }
    }
    return c;
}

ClassCounts from_sets(const std::set<int> &pred, const std::set<int> &gt) {
    ClassCounts c;
    for (int x : pred) (gt.contains(x) ? c.tp : c.fp)++;
    for (int x : gt) c.fn += !pred.contains(x);
    return c;
}

ClassCounts from_counts(int pred, int gt) {
    ClassCounts c;
    c.tp = std::min(pred, gt);
    c.fp = std::max(0, pred - gt);
    c.fn = std::max(0, gt - pred);
    return c;
}

} // namespace

ConfusionTable partition_confusion(const StructuredReport &pred, const StructuredReport &gt,
                                   const DentalOntology &ontology) {
    ConfusionTable t;
    for (Region r : kRegions) t.classes.push_back(to_string(r));
    for (SizeClass s : kSizeClasses) t.classes.push_back(to_string(s));

    if (!pred.fdi_present.empty() && !gt.fdi_present.empty()) {
        auto bucket = [&](const StructuredReport &rep, auto classify, auto label) {
            std::set<int> out;
            for (int code : rep.fdi_present)
                if (ontology.is_known(code) && classify(code) == label) out.insert(code);
            return out;
        };
        for (Region r : kRegions)
            t.counts.push_back(from_sets(bucket(pred, [&](int c) { return ontology.region_of(c); }, r),
                                         bucket(gt, [&](int c) { return ontology.region_of(c); }, r)));
        for (SizeClass s : kSizeClasses)
            t.counts.push_back(from_sets(bucket(pred, [&](int c) { return ontology.size_of(c); }, s),
                                         bucket(gt, [&](int c) { return ontology.size_of(c); }, s)));
        return t;
    }
    const auto pr = regions_of(pred, ontology), gr = regions_of(gt, ontology);
    const auto ps = sizes_of(pred, ontology), gs = sizes_of(gt, ontology);
    const RegionCounts empty_r;
    const SizeCounts empty_s;
    for (Region r : kRegions) t.counts.push_back(from_counts((pr ? *pr : empty_r).get(r), (gr ? *gr : empty_r).get(r)));
    for (SizeClass s : kSizeClasses)
        t.counts.push_back(from_counts((ps ? *ps : empty_s).get(s), (gs ? *gs : empty_s).get(s)));
    return t;
}

std::optional<Stat> summarize(const std::vector<double> &values) {
    if (values.empty()) return std::nullopt;
    Stat s;
    s.n = values.size();
    s.mean = mean_or_zero(values);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

namespace {
enum MetricIndex { kAE, kRE, kAcc, kOver, kUnder, kMacroF1, kStageAcc, kJsonValid, kHalluc };
}

CaseMetrics case_metrics(std::string case_id, ArchSide arch, const InferenceOutcome *outcome,
                         const StructuredReport &gt, const DentalOntology &ontology) {
    CaseMetrics m;
    m.case_id = std::move(case_id);
    m.arch = arch;
    m.gt_teeth = gt.teeth_number;
    m.gt_stage = gt.dentition_stage;
    m.gt_regions = regions_of(gt, ontology);
    m.gt_sizes = sizes_of(gt, ontology);
    if (!outcome) {
        m.failed = true;
        return m;
    }
    m.json_valid = outcome->json_valid && outcome->report;
    m.values[kJsonValid] = m.json_valid ? 100.0 : 0.0;
    if (!m.json_valid) return m;

    const auto &pred = *outcome->report;
    m.pred_teeth = pred.teeth_number;
    m.pred_stage = pred.dentition_stage;
    m.pred_regions = regions_of(pred, ontology);
    m.pred_sizes = sizes_of(pred, ontology);
    const bool stage_known = std::none_of(pred.unknown_labels.begin(), pred.unknown_labels.end(),
                                          [](const std::string &l) { return l.starts_with("stage:"); });

    const double p = pred.teeth_number, g = gt.teeth_number;
    m.values[kAE] = abs_err(p, g);
    if (g == 0.0) {
        m.excluded_gt0 = true;
    } else {
        const auto ra = rel_err_acc(p, g);
        m.values[kRE] = ra.re;
        m.values[kAcc] = ra.acc;
        if (p > g) m.values[kOver] = 100.0 * (p - g) / g;
        if (p < g) m.values[kUnder] = 100.0 * (g - p) / g;
    }
    m.values[kMacroF1] = macro_f1(partition_confusion(pred, gt, ontology));
    m.values[kStageAcc] = (stage_known && pred.dentition_stage == gt.dentition_stage) ? 100.0 : 0.0;
    m.values[kHalluc] = out_of_ontology_labels(pred, ontology).empty() ? 0.0 : 100.0;
    return m;
}

MetricSummary aggregate(const std::vector<CaseMetrics> &input, const std::string &group) {
    std::vector<CaseMetrics> records = input;
    std::sort(records.begin(), records.end(), [](const CaseMetrics &a, const CaseMetrics &b) {
        return std::tie(a.case_id, a.arch) < std::tie(b.case_id, b.arch);
    });
    MetricSummary out;
    out.group = group;
    std::array<std::vector<double>, 9> columns;
    if (group == "all") {
        std::map<std::string, std::vector<const CaseMetrics *>> by_case;
        for (const auto &r : records) by_case[r.case_id].push_back(&r);
        for (const auto &[id, arches] : by_case) {
            ++out.records;
            bool all_failed = true;
            for (const auto *r : arches) {
                all_failed = all_failed && r->failed;
                out.excluded_gt0 += r->excluded_gt0;
            }
            out.failed += all_failed;
            for (std::size_t k = 0; k < columns.size(); ++k) {
                double sum = 0.0;
                int n = 0;
                for (const auto *r : arches)
                    if (r->values[k]) {
                        sum += *r->values[k];
                        ++n;
                    }
                if (n > 0) columns[k].push_back(sum / n);
            }
        }
    } else {
        for (const auto &r : records) {
            if (to_string(r.arch) != group) continue;
            ++out.records;
            out.excluded_gt0 += r.excluded_gt0;
            out.failed += r.failed;
            for (std::size_t k = 0; k < columns.size(); ++k)
                if (r.values[k]) columns[k].push_back(*r.values[k]);
        }
    }
    for (std::size_t k = 0; k < columns.size(); ++k) out.metrics[k] = summarize(columns[k]);
    return out;
}

std::string csv_number(std::optional<double> value) { return value ? fmt::format("{:.6f}", *value) : std::string(); }

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FileNotFound(fmt::format("cannot open for writing: {}", path.string()));
    return out;
}

std::string csv_field(const std::string &text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string q = "\"";
    for (char c : text) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

struct CategoryRow {
    std::vector<double> pred, ae, re, acc;
    void add(int p, int g) {
        pred.push_back(p);
        ae.push_back(std::abs(p - g));
        if (g > 0) {
            const auto ra = rel_err_acc(p, g);
            re.push_back(ra.re);
            acc.push_back(ra.acc);
        }
    }
};

std::optional<double> mean_of(const std::vector<double> &v) {
    if (v.empty()) return std::nullopt;
    return summarize(v)->mean;
}

} // namespace

void write_metric_files(const std::filesystem::path &outdir, const std::vector<CaseMetrics> &input,
                        const std::string &variant_name) {
    std::filesystem::create_directories(outdir);
    std::vector<CaseMetrics> records = input;
    std::sort(records.begin(), records.end(), [](const CaseMetrics &a, const CaseMetrics &b) {
        return std::tie(a.case_id, a.arch) < std::tie(b.case_id, b.arch);
    });

    {
        auto out = open_out(outdir / "metrics.csv");
        out << "variant,group,records,excluded_gt0,failed";
        for (const char *name : kMetricNames) out << ',' << name << "_mean," << name << "_std";
        out << '\n';
        for (const char *group : {"upper", "lower", "all"}) {
            const auto s = aggregate(records, group);
            out << csv_field(variant_name) << ',' << group << ',' << s.records << ',' << s.excluded_gt0 << ','
                << s.failed;
            for (const auto &m : s.metrics)
                out << ',' << csv_number(m ? std::optional(m->mean) : std::nullopt) << ','
                    << csv_number(m ? std::optional(m->std) : std::nullopt);
            out << '\n';
        }
    }
    {
        nlohmann::ordered_json j;
        j["variant"] = variant_name;
        j["aggregation"] = "per arch record; the 'all' group averages each case's arches, then averages over cases";
        j["std"] = "sample (n-1); 0 for a single value";
        for (const char *group : {"upper", "lower", "all"}) {
            const auto s = aggregate(records, group);
            nlohmann::ordered_json g;
            g["records"] = s.records;
            g["excluded_gt0"] = s.excluded_gt0;
            g["failed"] = s.failed;
            for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
                if (s.metrics[k])
                    g["metrics"][kMetricNames[k]] = {
                        {"mean", s.metrics[k]->mean}, {"std", s.metrics[k]->std}, {"n", s.metrics[k]->n}};
                else
                    g["metrics"][kMetricNames[k]] = nullptr;
            }
            j["groups"][group] = g;
        }
        auto out = open_out(outdir / "metrics.json");
        out << j.dump(2) << '\n';
    }
    {
        auto out = open_out(outdir / "per_case.csv");
        out << "case_id,arch,failed,json_valid,excluded_gt0,pred_teeth,gt_teeth,pred_stage,gt_stage";
        for (const char *name : kMetricNames) out << ',' << name;
        out << '\n';
        for (const auto &r : records) {
            out << csv_field(r.case_id) << ',' << to_string(r.arch) << ',' << r.failed << ',' << r.json_valid << ','
                << r.excluded_gt0 << ',' << (r.pred_teeth ? std::to_string(*r.pred_teeth) : "") << ','
                << (r.gt_teeth ? std::to_string(*r.gt_teeth) : "") << ','
                << (r.pred_stage ? to_string(*r.pred_stage) : "") << ','
                << (r.gt_stage ? to_string(*r.gt_stage) : "");
            for (const auto &v : r.values) out << ',' << csv_number(v);
            out << '\n';
        }
    }
    {
        auto out = open_out(outdir / "categories.csv");
        out << "task,category,typical_count,n,pred,AE,RE,Acc,StageAcc\n";
        auto row = [&](const std::string &task, const std::string &cat, const std::string &typical,
                       const CategoryRow &c) {
            out << task << ',' << cat << ',' << typical << ',' << c.pred.size() << ',' << csv_number(mean_of(c.pred))
                << ',' << csv_number(mean_of(c.ae)) << ',' << csv_number(mean_of(c.re)) << ','
                << csv_number(mean_of(c.acc)) << ",\n";
        };
        for (ArchSide side : {ArchSide::Maxillary, ArchSide::Mandibular}) {
            CategoryRow c;
            for (const auto &r : records)
                if (r.arch == side && r.pred_teeth && r.gt_teeth) c.add(*r.pred_teeth, *r.gt_teeth);
            row("Tooth Counting", side == ArchSide::Maxillary ? "Arch (Upper)" : "Arch (Lower)", "", c);
        }
        const std::array<int, 3> region_typical{12, 8, 12}, size_typical{12, 16, 4};
        for (std::size_t k = 0; k < 3; ++k) {
            CategoryRow c;
            for (const auto &r : records)
                if (r.pred_regions && r.gt_regions) c.add(r.pred_regions->get(kRegions[k]), r.gt_regions->get(kRegions[k]));
            row("Anatomical Classification", to_string(kRegions[k]), std::to_string(region_typical[k]), c);
        }
        for (std::size_t k = 0; k < 3; ++k) {
            CategoryRow c;
            for (const auto &r : records)
                if (r.pred_sizes && r.gt_sizes) c.add(r.pred_sizes->get(kSizeClasses[k]), r.gt_sizes->get(kSizeClasses[k]));
            row("Size Classification", to_string(kSizeClasses[k]), std::to_string(size_typical[k]), c);
        }
        for (DentitionStage s : {DentitionStage::Deciduous, DentitionStage::Mixed, DentitionStage::Permanent}) {
            std::vector<double> hits;
            for (const auto &r : records)
                if (r.gt_stage == s && r.values[kStageAcc]) hits.push_back(*r.values[kStageAcc]);
            out << "Dentition Stage," << to_string(s) << ",," << hits.size() << ",,,,," << csv_number(mean_of(hits))
                << '\n';
        }
    }
}

} // namespace archmap
