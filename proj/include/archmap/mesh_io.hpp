#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "archmap/errors.hpp"

namespace archmap {

/// One vertex per row, libigl style.
template <typename Scalar>
using VerticesX = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
using Vertices = VerticesX<double>;

/// One vertex-index triple per row.
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;

template <typename Scalar>
using Points2X = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
using Points2 = Points2X<double>;

enum class StlFormat { Binary, Ascii };

/// Indexed triangle mesh. Immutable once constructed; the constructor
/// enforces index range, finiteness and the minimum vertex/face counts.
class TriangleMesh {
public:
    TriangleMesh(Vertices vertices, Faces faces,
                 StlFormat source_format = StlFormat::Binary);

    const Vertices &vertices() const noexcept { return vertices_; }
    const Faces &faces() const noexcept { return faces_; }
    StlFormat source_format() const noexcept { return format_; }

    Eigen::Index vertex_count() const noexcept { return vertices_.rows(); }
    Eigen::Index face_count() const noexcept { return faces_.rows(); }

private:
    Vertices vertices_;
    Faces faces_;
    StlFormat format_;
};

/// Occlusal (xy) projection with the subtracted centroid recorded.
struct Point2Set {
    Points2 points;
    Eigen::Vector2d origin_offset = Eigen::Vector2d::Zero();
};

/// Parse binary or ASCII STL. Binary is chosen iff the declared facet count
/// matches the byte length exactly; otherwise the content is read as ASCII.
/// Per-facet vertices are welded within 1e-9 of the bounding-box diagonal,
/// indices assigned in first-occurrence order. Stored facet normals are
/// ignored.
TriangleMesh parse_stl(std::span<const std::uint8_t> bytes);

TriangleMesh read_stl(const std::filesystem::path &path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);

/// Binary STL with normals recomputed from winding (zero for degenerate
/// faces) and zeroed attribute words.
std::vector<std::uint8_t> to_binary_stl(const Vertices &vertices,
                                        const Faces &faces,
                                        std::string_view header = "archmap");

void write_binary_stl(const std::filesystem::path &path,
                      const Vertices &vertices, const Faces &faces);

/// Per-face unit normals from counter-clockwise winding.
Vertices face_normals(const Vertices &vertices, const Faces &faces);

/// Mean of the (welded, hence unique) vertices.
Eigen::Vector3d centroid(const TriangleMesh &mesh);

Point2Set occlusal_projection(const TriangleMesh &mesh);

} // namespace archmap
