#include "archmap/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace archmap {

std::string to_string(ArchSide side) { return side == ArchSide::Maxillary ? "upper" : "lower"; }

std::string to_string(RenderMode mode) { return mode == RenderMode::SSP ? "ssp" : "uvp"; }

std::string to_string(ViewName view) {
    switch (view) {
    case ViewName::Front: return "front";
    case ViewName::Back: return "back";
    case ViewName::Bottom: return "bottom";
    }
    return "front";
}

ArchSide parse_arch_side(std::string_view text) {
    if (text == "upper" || text == "maxillary") return ArchSide::Maxillary;
    if (text == "lower" || text == "mandibular") return ArchSide::Mandibular;
    throw InvalidConfig(fmt::format("unknown arch side '{}'", text));
}

RenderMode parse_render_mode(std::string_view text) {
    if (text == "ssp" || text == "SSP") return RenderMode::SSP;
    if (text == "uvp" || text == "UVP") return RenderMode::UVP;
    throw InvalidConfig(fmt::format("unknown render mode '{}'", text));
}

std::array<CameraPose, 3> canonical_cameras(ArchSide side) {
    std::array<CameraPose, 3> poses;
    poses[0].view = ViewName::Front;
    poses[0].position = {0.0, kCameraDistance, 0.0};
    poses[1].view = ViewName::Back;
    poses[1].position = {0.0, -kCameraDistance, 0.0};
    poses[2].view = ViewName::Bottom;
    if (side == ArchSide::Maxillary) {
        poses[2].position = {0.0, 0.0, -kCameraDistance};
    } else {
        poses[2].position = {0.0, 0.0, kCameraDistance};
        poses[2].mirrored = true;
    }
    return poses;
}

RgbImage::RgbImage(int w, int h, const Rgb8 &fill) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

void RenderConfig::validate() const {
    if (width <= 0 || height <= 0) throw InvalidConfig("render width and height must be positive");
    for (const double w : {ambient, diffuse, specular})
        if (!(w >= 0.0 && w <= 1.0)) throw InvalidConfig("shading weights must lie in [0, 1]");
    if (!(shininess > 0.0)) throw InvalidConfig("render.shininess must be > 0");
    if (!(point_radius > 0.0)) throw InvalidConfig("render.point_radius must be > 0");
    if (!(crop_ratio > 0.0)) throw InvalidConfig("render.crop_ratio must be > 0");
    if (light_direction && !(light_direction->norm() > 0.0))
        throw InvalidConfig("render.light_direction must be non-zero");
}

NormalizedMesh normalize_for_render(const Vertices &vertices, const Faces &faces) {
    if (vertices.rows() == 0) throw DegenerateBounds("mesh has no vertices");
    const Eigen::RowVector3d lo = vertices.colwise().minCoeff();
    const Eigen::RowVector3d hi = vertices.colwise().maxCoeff();
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0)) throw DegenerateBounds("bounding box has zero extent on every axis");

    NormalizedMesh out;
    out.center = ((lo + hi) / 2.0).transpose();
    out.scale = 2.0 / extent;
    out.vertices = (vertices.rowwise() - out.center.transpose()) * out.scale;
    out.faces = faces;
    return out;
}

double field_of_view_degrees(const CameraPose &pose) {
    return 2.0 * std::atan(pose.reference_width / (2.0 * pose.focal_equiv)) * 180.0 / std::numbers::pi;
}

ViewTransform look_at(const CameraPose &pose, int width, int height) {
    const Eigen::Vector3d forward = (pose.target - pose.position).normalized();
    Eigen::Vector3d right = forward.cross(pose.up).normalized();
    const Eigen::Vector3d true_up = right.cross(forward);
    if (pose.mirrored) right = -right;

    ViewTransform vt;
    vt.rotation.row(0) = right.transpose();
    vt.rotation.row(1) = true_up.transpose();
    vt.rotation.row(2) = forward.transpose();
    vt.eye = pose.position;
    vt.width = width;
    vt.height = height;
    vt.tan_half_fov_up = pose.reference_width / (2.0 * pose.focal_equiv);
    vt.tan_half_fov_side = vt.tan_half_fov_up * static_cast<double>(width) / static_cast<double>(height);
    return vt;
}

std::optional<ScreenPoint> ViewTransform::project(const Eigen::Vector3d &world) const {
    const Eigen::Vector3d c = to_camera(world);
    if (!(c.z() > near_plane)) return std::nullopt;
    const double ndc_side = c.x() / (c.z() * tan_half_fov_side);
    const double ndc_up = c.y() / (c.z() * tan_half_fov_up);
    return ScreenPoint{(ndc_side + 1.0) * 0.5 * width, (1.0 - ndc_up) * 0.5 * height, c.z()};
}

namespace {

Vertices vertex_normals(const Vertices &v, const Faces &f) {
    Vertices n = Vertices::Zero(v.rows(), 3);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const Eigen::RowVector3d a = v.row(f(i, 0));
        const Eigen::RowVector3d e1 = v.row(f(i, 1)) - a;
        const Eigen::RowVector3d e2 = v.row(f(i, 2)) - a;
        const Eigen::RowVector3d cr = e1.cross(e2); // area weighted
        for (int k = 0; k < 3; ++k) n.row(f(i, k)) += cr;
    }
    for (Eigen::Index i = 0; i < n.rows(); ++i) {
        const double len = n.row(i).norm();
        if (len > 0.0) n.row(i) /= len;
    }
    return n;
}

inline double edge(const Eigen::Vector2d &a, const Eigen::Vector2d &b, const Eigen::Vector2d &p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

std::uint8_t to_byte(double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

} // namespace

RgbImage rasterize_ssp(const NormalizedMesh &mesh, const CameraPose &pose, const RenderConfig &config) {
    config.validate();
    RgbImage image(config.width, config.height, config.background);
    if (mesh.faces.rows() == 0 || mesh.vertices.rows() == 0) return image;

    const ViewTransform view = look_at(pose, config.width, config.height);
    const Eigen::Index nv = mesh.vertices.rows();

    const Vertices normals = vertex_normals(mesh.vertices, mesh.faces);
    Vertices cam(nv, 3), cam_normals(nv, 3);
    std::vector<std::optional<ScreenPoint>> screen(static_cast<std::size_t>(nv));
    for (Eigen::Index i = 0; i < nv; ++i) {
        const Eigen::Vector3d w = mesh.vertices.row(i).transpose();
        cam.row(i) = view.to_camera(w).transpose();
        cam_normals.row(i) = (view.rotation * normals.row(i).transpose()).transpose();
        screen[static_cast<std::size_t>(i)] = view.project(w);
    }

    const Eigen::Vector3d light = config.light_direction
                                      ? Eigen::Vector3d(view.rotation * config.light_direction->normalized())
                                      : Eigen::Vector3d(0.0, 0.0, -1.0);

    std::vector<double> inv_depth(static_cast<std::size_t>(config.width) * config.height, 0.0);

    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
        const auto &s0 = screen[static_cast<std::size_t>(i0)];
        const auto &s1 = screen[static_cast<std::size_t>(i1)];
        const auto &s2 = screen[static_cast<std::size_t>(i2)];
        if (!s0 || !s1 || !s2) continue; // near-plane crossing: not clipped, dropped

        const Eigen::Vector2d p0(s0->x, s0->y), p1(s1->x, s1->y), p2(s2->x, s2->y);
        const double area = edge(p0, p1, p2);
        if (area == 0.0) continue;

        const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
        const int x_hi = std::min(config.width - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}) - 0.5)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
        const int y_hi = std::min(config.height - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}) - 0.5)));

        const double iz0 = 1.0 / s0->depth, iz1 = 1.0 / s1->depth, iz2 = 1.0 / s2->depth;

        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double w0 = edge(p1, p2, p);
                const double w1 = edge(p2, p0, p);
                const double w2 = edge(p0, p1, p);
                const bool inside = area > 0.0 ? (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0)
                                               : (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
                if (!inside) continue;

                const double l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
                const double inv_z = l0 * iz0 + l1 * iz1 + l2 * iz2;
                double &zbuf = inv_depth[static_cast<std::size_t>(y) * config.width + x];
                if (!(inv_z > zbuf)) continue;
                zbuf = inv_z;

                const double m0 = l0 * iz0 / inv_z, m1 = l1 * iz1 / inv_z, m2 = l2 * iz2 / inv_z;
                Eigen::Vector3d n = m0 * cam_normals.row(i0).transpose() + m1 * cam_normals.row(i1).transpose() +
                                    m2 * cam_normals.row(i2).transpose();
                const Eigen::Vector3d pos = m0 * cam.row(i0).transpose() + m1 * cam.row(i1).transpose() +
                                            m2 * cam.row(i2).transpose();
                const Eigen::Vector3d to_eye = (-pos).normalized();
                const double nlen = n.norm();
                n = nlen > 0.0 ? Eigen::Vector3d(n / nlen) : to_eye;
                if (n.dot(to_eye) < 0.0) n = -n; // two-sided

                const double diff = std::max(0.0, n.dot(light));
                double highlight = 0.0;
                if (diff > 0.0) {
                    const Eigen::Vector3d half = (light + to_eye).normalized();
                    highlight = std::pow(std::max(0.0, n.dot(half)), config.shininess);
                }
                const Eigen::Vector3d rgb =
                    config.base_color * (config.ambient + config.diffuse * diff) +
                    Eigen::Vector3d::Constant(config.specular * highlight);
                std::uint8_t *px = image.at(x, y);
                px[0] = to_byte(rgb[0]);
                px[1] = to_byte(rgb[1]);
                px[2] = to_byte(rgb[2]);
            }
        }
    }
    return image;
}

RgbImage rasterize_uvp(const NormalizedMesh &mesh, const CameraPose &pose, const RenderConfig &config,
                       std::size_t *discs_drawn) {
    config.validate();
    RgbImage image(config.width, config.height, config.background);
    const ViewTransform view = look_at(pose, config.width, config.height);
    const double r = config.point_radius;
    std::size_t drawn = 0;
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        const auto sp = view.project(mesh.vertices.row(i).transpose());
        if (!sp) continue;
        const int x_lo = std::max(0, static_cast<int>(std::floor(sp->x - r - 0.5)));
        const int x_hi = std::min(config.width - 1, static_cast<int>(std::ceil(sp->x + r - 0.5)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(sp->y - r - 0.5)));
        const int y_hi = std::min(config.height - 1, static_cast<int>(std::ceil(sp->y + r - 0.5)));
        bool any = false;
        for (int y = y_lo; y <= y_hi; ++y)
            for (int x = x_lo; x <= x_hi; ++x) {
                const double dx = x + 0.5 - sp->x, dy = y + 0.5 - sp->y;
                if (dx * dx + dy * dy > r * r) continue;
                std::uint8_t *px = image.at(x, y);
                px[0] = config.point_color[0];
                px[1] = config.point_color[1];
                px[2] = config.point_color[2];
                any = true;
            }
        if (any) ++drawn;
    }
    if (discs_drawn) *discs_drawn = drawn;
    return image;
}

RgbImage crop_to_aspect(const RgbImage &image, double ratio) {
    if (!(ratio > 0.0)) throw InvalidConfig("crop ratio must be > 0");
    const double current = static_cast<double>(image.width) / image.height;
    int w = image.width, h = image.height;
    if (std::abs(current - ratio) <= 1e-9 * ratio) return image;
    if (current > ratio)
        w = static_cast<int>(std::floor(image.height * ratio + 1e-9));
    else
        h = static_cast<int>(std::floor(image.width / ratio + 1e-9));
    const int x0 = (image.width - w) / 2;
    const int y0 = (image.height - h) / 2;

    RgbImage out;
    out.width = w;
    out.height = h;
    out.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        std::copy_n(image.at(x0, y0 + y), static_cast<std::size_t>(w) * 3, out.at(0, y));
    return out;
}

MultiViewSet render_views(const Vertices &vertices, const Faces &faces, ArchSide side, RenderMode mode,
                          const RenderConfig &config) {
    const NormalizedMesh mesh = normalize_for_render(vertices, faces);
    MultiViewSet set;
    set.arch_side = side;
    set.render_mode = mode;
    const auto poses = canonical_cameras(side);
    for (std::size_t v = 0; v < poses.size(); ++v) {
        const RgbImage raw = mode == RenderMode::SSP ? rasterize_ssp(mesh, poses[v], config)
                                                     : rasterize_uvp(mesh, poses[v], config);
        set.views[v] = crop_to_aspect(raw, config.crop_ratio);
    }
    return set;
}

} // namespace archmap
