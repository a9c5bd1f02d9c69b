#include "doctest.h"

#include "archmap/render.hpp"
#include "archmap/synth.hpp"
#include "oracles.hpp"

using namespace archmap;

namespace {

NormalizedMesh raw(const Vertices &v, const Faces &f) {
    NormalizedMesh m;
    m.vertices = v;
    m.faces = f;
    return m;
}

std::size_t differing(const RgbImage &a, const RgbImage &b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.pixels.size(); i += 3)
        n += a.pixels[i] != b.pixels[i] || a.pixels[i + 1] != b.pixels[i + 1] || a.pixels[i + 2] != b.pixels[i + 2];
    return n;
}

SynthArch fixture_arch() {
    SynthArchParams p;
    p.along_samples = 121;
    return make_synthetic_arch(p);
}

} // namespace

TEST_SUITE("render") {

TEST_CASE("canonical cameras") {
    const auto upper = canonical_cameras(ArchSide::Maxillary);
    const auto lower = canonical_cameras(ArchSide::Mandibular);
    CHECK(upper[0].position == Eigen::Vector3d(0, 2.6, 0));
    CHECK(upper[1].position == Eigen::Vector3d(0, -2.6, 0));
    CHECK(upper[2].position == Eigen::Vector3d(0, 0, -2.6));
    CHECK(lower[2].position == Eigen::Vector3d(0, 0, 2.6));
    CHECK(lower[0].position == upper[0].position);
    for (const auto &set : {upper, lower})
        for (const auto &pose : set) {
            CHECK(std::abs((pose.position - pose.target).norm() - 2.6) < 1e-12);
            CHECK(pose.up == Eigen::Vector3d(1, 0, 0));
            CHECK(pose.focal_equiv == 35.0);
        }
}

TEST_CASE("look-at basis and field of view") {
    const auto cams = canonical_cameras(ArchSide::Maxillary);
    const ViewTransform front = look_at(cams[0], 1024, 768);
    CHECK(front.forward().isApprox(Eigen::Vector3d(0, -1, 0)));
    CHECK(field_of_view_degrees(cams[0]) == doctest::Approx(2 * std::atan(36.0 / 70.0) * 180 / std::numbers::pi).epsilon(1e-12));
    CHECK(field_of_view_degrees(cams[0]) == doctest::Approx(54.43).epsilon(1e-4));
    for (const auto &pose : cams) {
        const auto c = look_at(pose, 1024, 768).project(Eigen::Vector3d::Zero());
        REQUIRE(c);
        CHECK(c->x == doctest::Approx(512));
        CHECK(c->y == doctest::Approx(384));
        const Eigen::Matrix3d r = look_at(pose, 1024, 768).rotation;
        CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
        // rows (side, up, forward) with +z forward: left-handed unless mirrored
        CHECK(r.determinant() == doctest::Approx(pose.mirrored ? 1.0 : -1.0));
    }
    CHECK_FALSE(front.project(Eigen::Vector3d(0, 3, 0)));
}

TEST_CASE("normalization") {
    Vertices v(2, 3);
    v << 0, 0, 0, 4, 2, 1;
    Faces f(0, 3);
    const NormalizedMesh n = normalize_for_render(v, f);
    CHECK(n.scale == 0.5);
    const Eigen::RowVector3d extent = n.vertices.colwise().maxCoeff() - n.vertices.colwise().minCoeff();
    CHECK(extent.isApprox(Eigen::RowVector3d(2, 1, 0.5)));
    const NormalizedMesh again = normalize_for_render(n.vertices, n.faces);
    CHECK(again.vertices.isApprox(n.vertices));
    Vertices point(3, 3);
    point.setConstant(1.5);
    CHECK_THROWS_AS(normalize_for_render(point, f), DegenerateBounds);
}

TEST_CASE("normalized flattened layouts stay inside every frustum") {
    // arc length dominates a flattened arch; width and height stay under
    // half of it
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1), ratio(0.05, 0.5);
    for (int trial = 0; trial < 30; ++trial) {
        const double span = 20 + 160 * ratio(rng);
        const double width = span * ratio(rng), height = span * ratio(rng);
        Vertices v(200, 3);
        for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) << span * u(rng), width * u(rng), height * u(rng);
        const NormalizedMesh n = normalize_for_render(v, Faces(0, 3));
        for (auto side : {ArchSide::Maxillary, ArchSide::Mandibular})
            for (const auto &pose : canonical_cameras(side)) {
                const ViewTransform view = look_at(pose, 1024, 768);
                for (Eigen::Index i = 0; i < n.vertices.rows(); ++i) {
                    const auto p = view.project(n.vertices.row(i).transpose());
                    REQUIRE(p);
                    CHECK(p->x >= 0);
                    CHECK(p->x <= 1024);
                    CHECK(p->y >= 0);
                    CHECK(p->y <= 768);
                }
            }
    }
}

TEST_CASE("empty mesh renders background") {
    RenderConfig cfg;
    cfg.background = Rgb8(10, 20, 30);
    const RgbImage img = rasterize_ssp(raw(Vertices(0, 3), Faces(0, 3)), canonical_cameras(ArchSide::Maxillary)[0], cfg);
    CHECK(img == RgbImage(1024, 768, Rgb8(10, 20, 30)));
}

TEST_CASE("single triangle coverage matches the edge-function oracle") {
    RenderConfig cfg;
    cfg.width = 160;
    cfg.height = 120;
    const CameraPose front = canonical_cameras(ArchSide::Maxillary)[0];
    // front camera: side axis +z, up axis +x, looking down -y
    const oracle::AxisCamera cam{{0, 2.6, 0}, {0, 0, 1}, {1, 0, 0}, {0, -1, 0}, 36.0 / 70.0, 160, 120};
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(-0.9, 0.9), depth(-0.5, 0.5);
    int checked = 0;
    while (checked < 12) {
        Vertices v(3, 3);
        for (int i = 0; i < 3; ++i) v.row(i) << u(rng), depth(rng), u(rng);
        Faces f(1, 3);
        f << 0, 1, 2;
        std::array<std::array<double, 2>, 3> screen;
        for (int i = 0; i < 3; ++i) screen[i] = cam.project({v(i, 0), v(i, 1), v(i, 2)});
        double margin = 0;
        const auto mask = oracle::triangle_coverage(screen, 160, 120, &margin);
        if (margin < 1e-7) continue;
        const RgbImage img = rasterize_ssp(raw(v, f), front, cfg);
        std::size_t mismatches = 0;
        for (int y = 0; y < 120; ++y)
            for (int x = 0; x < 160; ++x) {
                const std::uint8_t *p = img.at(x, y);
                const bool covered = p[0] || p[1] || p[2];
                mismatches += covered != static_cast<bool>(mask[static_cast<std::size_t>(y) * 160 + x]);
            }
        CHECK(mismatches == 0);
        ++checked;
    }
}

TEST_CASE("nearer triangle wins") {
    RenderConfig cfg;
    cfg.width = 64;
    cfg.height = 48;
    cfg.light_direction = Eigen::Vector3d(0, 1, 0);
    Vertices v(6, 3);
    v << -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, 0, 0.5, 0.5, // nearer to the front camera
        -0.5, -0.5, -0.5, 0.5, -0.5, -0.5, 0, -0.5, 0.5;
    Faces near(1, 3), far(1, 3), both(2, 3);
    near << 0, 1, 2;
    far << 3, 4, 5;
    const CameraPose front = canonical_cameras(ArchSide::Maxillary)[0];
    const RgbImage only_near = rasterize_ssp(raw(v, near), front, cfg);
    both << 3, 4, 5, 0, 1, 2;
    const RgbImage ordered_far_first = rasterize_ssp(raw(v, both), front, cfg);
    both << 0, 1, 2, 3, 4, 5;
    const RgbImage ordered_near_first = rasterize_ssp(raw(v, both), front, cfg);
    // inside the near triangle's footprint the near face always shows
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x)
            if (only_near.at(x, y)[0]) {
                CHECK(ordered_far_first.at(x, y)[0] == only_near.at(x, y)[0]);
                CHECK(ordered_near_first.at(x, y)[0] == only_near.at(x, y)[0]);
            }
    (void)far;
}

TEST_CASE("uvp scatter") {
    RenderConfig cfg;
    cfg.width = 64;
    cfg.height = 48;
    Vertices v(2, 3);
    v << 0, 0, 0, 0, 3.0, 0; // second vertex behind the front camera
    std::size_t drawn = 0;
    const RgbImage img = rasterize_uvp(raw(v, Faces(0, 3)), canonical_cameras(ArchSide::Maxillary)[0], cfg, &drawn);
    CHECK(drawn == 1);
    CHECK(img.at(32, 24)[0] == cfg.point_color[0]);
    CHECK(img.at(0, 0)[0] == 0);
}

TEST_CASE("crop") {
    const RgbImage base(1024, 768, Rgb8(1, 2, 3));
    CHECK(crop_to_aspect(base, 4.0 / 3.0) == base);
    const RgbImage wide(1000, 768, Rgb8(1, 2, 3));
    const RgbImage cropped = crop_to_aspect(wide, 4.0 / 3.0);
    CHECK(cropped.width == 1000);
    CHECK(cropped.height == 750);
    CHECK(crop_to_aspect(cropped, 4.0 / 3.0) == cropped);
}

TEST_CASE("views are ordered, deterministic and mirror-symmetric") {
    const SynthArch arch = fixture_arch();
    RenderConfig cfg;
    cfg.width = 320;
    cfg.height = 240;
    const MultiViewSet a = render_views(arch.vertices, arch.faces, ArchSide::Maxillary, RenderMode::SSP, cfg);
    const MultiViewSet b = render_views(arch.vertices, arch.faces, ArchSide::Maxillary, RenderMode::SSP, cfg);
    CHECK(a.views == b.views);
    CHECK(encode_png(a.views[2]) == encode_png(b.views[2]));
    for (const auto &v : a.views) {
        CHECK(v.width == 320);
        CHECK(v.height == 240);
    }
    CHECK(differing(a.views[0], a.views[2]) > 0);

    Vertices mirrored = arch.vertices;
    mirrored.col(2) *= -1.0;
    const MultiViewSet m = render_views(mirrored, arch.faces, ArchSide::Mandibular, RenderMode::SSP, cfg);
    CHECK(differing(m.views[2], a.views[2]) == 0);

    const MultiViewSet u = render_views(arch.vertices, arch.faces, ArchSide::Maxillary, RenderMode::UVP, cfg);
    const MultiViewSet um = render_views(mirrored, arch.faces, ArchSide::Mandibular, RenderMode::UVP, cfg);
    CHECK(differing(u.views[2], um.views[2]) == 0);
}

TEST_CASE("ambient-only shading ignores the light") {
    const SynthArch arch = fixture_arch();
    RenderConfig cfg;
    cfg.width = 160;
    cfg.height = 120;
    cfg.diffuse = 0;
    cfg.specular = 0;
    cfg.light_direction = Eigen::Vector3d(1, 0, 0);
    const MultiViewSet a = render_views(arch.vertices, arch.faces, ArchSide::Maxillary, RenderMode::SSP, cfg);
    cfg.light_direction = Eigen::Vector3d(0, 0.3, -1);
    const MultiViewSet b = render_views(arch.vertices, arch.faces, ArchSide::Maxillary, RenderMode::SSP, cfg);
    CHECK(a.views == b.views);
}

TEST_CASE("ssp and uvp share camera geometry") {
    RenderConfig cfg;
    cfg.width = 200;
    cfg.height = 150;
    cfg.point_radius = 1.0; // always covers the centre of the pixel hit
    Vertices v(3, 3);
    v << 0.4, 0, 0.2, -0.3, 0, 0.5, 0.1, 0, -0.6;
    Faces f(1, 3);
    f << 0, 1, 2;
    for (const auto &pose : canonical_cameras(ArchSide::Maxillary)) {
        const ViewTransform view = look_at(pose, 200, 150);
        std::size_t drawn = 0;
        const RgbImage dots = rasterize_uvp(raw(v, f), pose, cfg, &drawn);
        CHECK(drawn == 3);
        for (int i = 0; i < 3; ++i) {
            const auto p = view.project(v.row(i).transpose());
            REQUIRE(p);
            CHECK(dots.at(static_cast<int>(p->x), static_cast<int>(p->y))[0] == cfg.point_color[0]);
        }
    }
}

}
