#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "archmap/flatten.hpp"
#include "archmap/mesh_io.hpp"

namespace archmap {

enum class ArchSide { Maxillary, Mandibular };
enum class RenderMode { SSP, UVP };
enum class ViewName { Front, Back, Bottom };

/// "upper" / "lower"
std::string to_string(ArchSide side);
/// "ssp" / "uvp"
std::string to_string(RenderMode mode);
/// "front" / "back" / "bottom"
std::string to_string(ViewName view);
/// Accepts upper|lower|maxillary|mandibular; throws InvalidConfig otherwise.
ArchSide parse_arch_side(std::string_view text);
RenderMode parse_render_mode(std::string_view text);

struct CameraPose {
    ViewName view = ViewName::Front;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d target = Eigen::Vector3d::Zero();
    Eigen::Vector3d up = Eigen::Vector3d::UnitX();
    double focal_equiv = 35.0;      // mm on a 36 mm reference frame
    double reference_width = 36.0;  // mm
    /// Mirror the image-plane right axis. Set on the mandibular bottom view so
    /// that the z-mirrored arch reproduces the maxillary bottom image.
    bool mirrored = false;
};

/// Camera distance of every canonical pose, normalized model units.
inline constexpr double kCameraDistance = 2.6;

/// Front (0,2.6,0), back (0,-2.6,0), bottom (0,0,-2.6) for the maxillary arch;
/// the mandibular bottom camera sits at (0,0,2.6). Up is (1,0,0) throughout.
std::array<CameraPose, 3> canonical_cameras(ArchSide side);

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // row-major RGB

    RgbImage() = default;
    RgbImage(int w, int h, const Eigen::Matrix<std::uint8_t, 3, 1> &fill);

    std::uint8_t *at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t *at(int x, int y) const {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    bool operator==(const RgbImage &) const = default;
};

using Rgb8 = Eigen::Matrix<std::uint8_t, 3, 1>;

struct RenderConfig {
    int width = 1024;
    int height = 768;
    Rgb8 background = Rgb8(0, 0, 0);
    Eigen::Vector3d base_color = Eigen::Vector3d(0.78, 0.78, 0.80);
    /// World-space direction towards the light; unset means a headlight
    /// along each camera's optical axis.
    std::optional<Eigen::Vector3d> light_direction;
    double ambient = 0.15;
    double diffuse = 0.4;
    double specular = 0.7;
    double shininess = 64.0;
    double point_radius = 1.5; // UVP disc radius, pixels
    Rgb8 point_color = Rgb8(230, 230, 230);
    double crop_ratio = 4.0 / 3.0;

    void validate() const;
};

/// Mesh centred on its bounding-box centre, longest extent scaled to 2.
struct NormalizedMesh {
    Vertices vertices;
    Faces faces;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double scale = 1.0;
};

NormalizedMesh normalize_for_render(const Vertices &vertices, const Faces &faces);
inline NormalizedMesh normalize_for_render(const FlattenedMesh &mesh) {
    return normalize_for_render(mesh.flat_vertices, mesh.faces);
}

/// Screen-space position: pixel coordinates (origin top-left, pixel centres
/// at half-integers) and camera depth along the optical axis.
struct ScreenPoint {
    double x = 0.0, y = 0.0, depth = 0.0;
};

/// World-to-camera basis plus pinhole intrinsics. The 35 mm / 36 mm field of
/// view spans the image axis aligned with the up vector.
struct ViewTransform {
    Eigen::Matrix3d rotation; // rows: right, true-up, forward
    Eigen::Vector3d eye;
    int width = 0, height = 0;
    double tan_half_fov_up = 0.0;
    double tan_half_fov_side = 0.0;
    double near_plane = 1e-3;

    Eigen::Vector3d forward() const { return rotation.row(2).transpose(); }
    Eigen::Vector3d to_camera(const Eigen::Vector3d &world) const { return rotation * (world - eye); }
    /// nullopt when the point lies behind the near plane.
    std::optional<ScreenPoint> project(const Eigen::Vector3d &world) const;
};

/// Field of view along the up axis, degrees: 2 atan(36 / (2 * 35)).
double field_of_view_degrees(const CameraPose &pose);

ViewTransform look_at(const CameraPose &pose, int width, int height);

/// Z-buffered, two-sided Blinn-Phong rasterization with interpolated vertex
/// normals; one sample per pixel centre.
RgbImage rasterize_ssp(const NormalizedMesh &mesh, const CameraPose &pose, const RenderConfig &config);

/// Flat-colour disc per visible vertex; no depth test, no shading.
/// `discs_drawn` receives the number of vertices splatted.
RgbImage rasterize_uvp(const NormalizedMesh &mesh, const CameraPose &pose, const RenderConfig &config,
                       std::size_t *discs_drawn = nullptr);

/// Centre crop to the largest sub-rectangle with width/height == ratio.
RgbImage crop_to_aspect(const RgbImage &image, double ratio);

struct MultiViewSet {
    std::array<RgbImage, 3> views; // front, back, bottom
    ArchSide arch_side = ArchSide::Maxillary;
    RenderMode render_mode = RenderMode::SSP;
};

MultiViewSet render_views(const Vertices &vertices, const Faces &faces, ArchSide side, RenderMode mode,
                          const RenderConfig &config);
inline MultiViewSet render_views(const FlattenedMesh &mesh, ArchSide side, RenderMode mode,
                                 const RenderConfig &config) {
    return render_views(mesh.flat_vertices, mesh.faces, side, mode, config);
}

/// 8-bit RGB PNG, deterministic byte stream (no timestamps).
std::vector<std::uint8_t> encode_png(const RgbImage &image);
void write_png(const std::filesystem::path &path, const RgbImage &image);

} // namespace archmap
