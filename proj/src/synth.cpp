#include "archmap/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "archmap/arch_fit.hpp"
#include "archmap/flatten.hpp"

namespace archmap {

SynthArch make_synthetic_arch(const SynthArchParams &p) {
    const int nu = p.along_samples, nv = p.across_samples;
    if (nu < 2 || nv < 2) throw InvalidConfig("synthetic arch needs at least 2 samples per direction");
    const Parabola<double> curve{p.a, 0.0, p.c};
    const double total = arc_length(curve, -p.half_width, p.half_width);
    const int teeth = 2 * p.teeth_per_side;
    const double pitch = total / teeth;
    const double sigma = 0.3 * pitch;
    const Eigen::Matrix2d place = rotation2d<double>(-p.theta_deg);
    const double sign = p.side == ArchSide::Maxillary ? -1.0 : 1.0;

    SynthArch out;
    out.vertices.resize(static_cast<Eigen::Index>(nu) * nv, 3);
    for (int i = 0; i < nu; ++i) {
        const double x = -p.half_width + 2.0 * p.half_width * i / (nu - 1);
        const double s = arc_length(curve, -p.half_width, x);
        double crowns = 0.0;
        for (int k = 0; k < teeth; ++k) {
            const double centre = (k + 0.5) * pitch;
            crowns += std::exp(-(s - centre) * (s - centre) / (2.0 * sigma * sigma));
        }
        const Eigen::Vector2d on_curve(x, curve(x));
        const Eigen::Vector2d normal = Eigen::Vector2d(-curve.slope(x), 1.0).normalized();
        for (int j = 0; j < nv; ++j) {
            const double d = -p.ribbon_half_width + 2.0 * p.ribbon_half_width * j / (nv - 1);
            const double profile = std::pow(std::cos(std::numbers::pi * d / (2.0 * p.ribbon_half_width * 1.05)), 2);
            const Eigen::Vector2d xy = place * (on_curve + d * normal) + p.translation;
            const double z = sign * profile * (p.base_height + p.crown_height * crowns);
            out.vertices.row(static_cast<Eigen::Index>(i) * nv + j) << xy.x(), xy.y(), z;
        }
    }
    out.faces.resize(static_cast<Eigen::Index>(nu - 1) * (nv - 1) * 2, 3);
    Eigen::Index f = 0;
    for (int i = 0; i + 1 < nu; ++i)
        for (int j = 0; j + 1 < nv; ++j) {
            const int v00 = i * nv + j, v01 = i * nv + j + 1, v10 = (i + 1) * nv + j, v11 = (i + 1) * nv + j + 1;
            out.faces.row(f++) << v00, v10, v11;
            out.faces.row(f++) << v00, v11, v01;
        }
    return out;
}

Points2 make_synthetic_cloud(const SynthCloudParams &p, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> ux(-p.half_width, p.half_width);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, p.noise_sigma);
    const Parabola<double> curve{p.a, p.b, p.c};
    const Eigen::Matrix2d place = rotation2d<double>(-p.theta_deg);
    Points2 out(p.count, 2);
    for (int i = 0; i < p.count; ++i) {
        const double x = ux(rng);
        Eigen::Vector2d q(x, curve(x));
        const Eigen::Vector2d normal = Eigen::Vector2d(-curve.slope(x), 1.0).normalized();
        if (unit(rng) < p.outlier_fraction) {
            const double magnitude = 5.0 + 10.0 * unit(rng);
            q += (unit(rng) < 0.5 ? -magnitude : magnitude) * normal;
        } else {
            q += Eigen::Vector2d(noise(rng), noise(rng));
        }
        out.row(i) = (place * q + p.translation).transpose();
    }
    return out;
}

StructuredReport synthetic_ground_truth(ArchSide side, int teeth_per_side, const DentalOntology &ontology) {
    StructuredReport r;
    r.arch = side;
    const std::array<int, 2> quadrants = side == ArchSide::Maxillary ? std::array{1, 2} : std::array{3, 4};
    for (int q : quadrants)
        for (int p = 1; p <= teeth_per_side; ++p) r.fdi_present.push_back(10 * q + p);
    std::sort(r.fdi_present.begin(), r.fdi_present.end());
    r.teeth_number = static_cast<int>(r.fdi_present.size());
    r.third_molar_evidence = teeth_per_side >= 8;
    r.dentition_stage = DentitionStage::Permanent;
    RegionCounts regions;
    SizeCounts sizes;
    for (int code : r.fdi_present) {
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
    r.anatomical_counts = regions;
    r.size_counts = sizes;
    r.notes = "synthetic fixture";
    return r;
}

void write_synthetic_dataset(const std::filesystem::path &dir, const SynthDatasetOptions &options,
                             const DentalOntology &ontology) {
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> theta(-options.max_theta_deg, options.max_theta_deg);
    std::uniform_real_distribution<double> curvature(0.01, 0.03);
    std::uniform_real_distribution<double> shift(-20.0, 20.0);

    std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
    if (!manifest) throw FileNotFound(fmt::format("cannot open for writing: {}", (dir / "manifest.csv").string()));
    manifest << "case_id,arch,mesh,ground_truth,theta_deg,a\n";
    for (int i = 0; i < options.count; ++i) {
        SynthArchParams p;
        p.theta_deg = theta(rng);
        p.a = curvature(rng);
        p.translation = Eigen::Vector2d(shift(rng), shift(rng));
        p.side = i % 2 == 0 ? ArchSide::Maxillary : ArchSide::Mandibular;
        p.teeth_per_side = 6 + static_cast<int>(rng() % 3);
        const auto mesh = make_synthetic_arch(p);
        const std::string case_id = fmt::format("case{:03d}", i + 1);
        const std::string stem = fmt::format("{}_{}", case_id, to_string(p.side));
        write_binary_stl(dir / (stem + ".stl"), mesh.vertices, mesh.faces);
        std::ofstream gt(dir / (stem + ".gt.json"), std::ios::trunc);
        gt << to_json(synthetic_ground_truth(p.side, p.teeth_per_side, ontology)).dump(2) << '\n';
        manifest << fmt::format("{},{},{}.stl,{}.gt.json,{:.6f},{:.6f}\n", case_id, to_string(p.side), stem, stem,
                                p.theta_deg, p.a);
    }
}

} // namespace archmap
