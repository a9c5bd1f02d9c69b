#pragma once

#include <cstdint>
#include <filesystem>
#include <random>

#include <Eigen/Dense>

#include "archmap/dkb.hpp"
#include "archmap/mesh_io.hpp"
#include "archmap/render.hpp"
#include "archmap/report.hpp"

namespace archmap {

/// Ribbon-shaped arch along y = a x^2 + c in its canonical frame, with one
/// Gaussian crown per tooth. The mesh is placed as R(-theta) * canonical +
/// translation, so a correct fit recovers theta_star = theta_deg.
struct SynthArchParams {
    double theta_deg = 0.0;
    double a = 0.02;
    double c = 0.0;
    double half_width = 30.0;      // canonical x in [-half_width, half_width]
    double ribbon_half_width = 4.0;
    int along_samples = 241;
    int across_samples = 9;
    int teeth_per_side = 7;
    double crown_height = 3.0;
    double base_height = 1.5;
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    ArchSide side = ArchSide::Maxillary;
};

struct SynthArch {
    Vertices vertices;
    Faces faces;
};

SynthArch make_synthetic_arch(const SynthArchParams &params);

/// Noisy 2D samples of y = a x^2 + b x + c on [-half_width, half_width],
/// rotated by -theta and translated; `outlier_fraction` of the points are
/// pushed off the curve by 5..15 units along the normal.
struct SynthCloudParams {
    double theta_deg = 0.0;
    double a = 0.02, b = 0.0, c = 0.0;
    double half_width = 30.0;
    int count = 20000;
    double noise_sigma = 0.1;
    double outlier_fraction = 0.05;
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
};

Points2 make_synthetic_cloud(const SynthCloudParams &params, std::mt19937_64 &rng);

/// Permanent-dentition ground truth with positions 1..teeth_per_side in
/// both quadrants of the arch.
StructuredReport synthetic_ground_truth(ArchSide side, int teeth_per_side, const DentalOntology &ontology);

struct SynthDatasetOptions {
    int count = 20;
    std::uint64_t seed = 1;
    double max_theta_deg = 30.0;
};

/// Writes <case>_<arch>.stl and <case>_<arch>.gt.json per case (arches
/// alternate upper/lower) plus manifest.csv with the construction angle and
/// curvature of each case.
void write_synthetic_dataset(const std::filesystem::path &dir, const SynthDatasetOptions &options,
                             const DentalOntology &ontology);

} // namespace archmap
