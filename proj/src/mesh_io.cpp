#include "archmap/mesh_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include <fmt/format.h>

namespace archmap {

static_assert(std::endian::native == std::endian::little,
              "STL I/O assumes a little-endian host");

namespace {

constexpr std::size_t kHeaderBytes = 80;
constexpr std::size_t kFacetBytes = 50;

struct SoupMesh {
    std::vector<Eigen::Vector3d> corners; // 3 per facet
};

std::uint32_t read_u32(const std::uint8_t *p) {
    std::uint32_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

float read_f32(const std::uint8_t *p) {
    float v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

SoupMesh parse_binary(std::span<const std::uint8_t> bytes, std::uint32_t count) {
    SoupMesh soup;
    soup.corners.reserve(std::size_t{count} * 3);
    const std::uint8_t *rec = bytes.data() + kHeaderBytes + 4;
    for (std::uint32_t f = 0; f < count; ++f, rec += kFacetBytes) {
        // skip the 12-byte stored normal
        for (int c = 0; c < 3; ++c) {
            const std::uint8_t *v = rec + 12 + 12 * c;
            soup.corners.emplace_back(read_f32(v), read_f32(v + 4), read_f32(v + 8));
        }
    }
    return soup;
}

class AsciiReader {
public:
    explicit AsciiReader(std::string_view text) : text_(text) {}

    std::string_view next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    }

    void expect(std::string_view word) {
        const auto tok = next();
        if (tok != word)
            throw MalformedAscii(fmt::format("expected '{}' but found '{}'", word,
                                             tok.empty() ? "<eof>" : tok));
    }

    double number() {
        const auto tok = next();
        double v = 0.0;
        const auto *first = tok.data();
        const auto *last = tok.data() + tok.size();
        const auto res = std::from_chars(first, last, v);
        if (tok.empty() || res.ec != std::errc{} || res.ptr != last)
            throw MalformedAscii(fmt::format("non-numeric coordinate '{}'", tok));
        return v;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

SoupMesh parse_ascii(std::span<const std::uint8_t> bytes) {
    const std::string_view text(reinterpret_cast<const char *>(bytes.data()), bytes.size());
    AsciiReader in(text);
    in.expect("solid");
    in.skip_line(); // optional solid name
    SoupMesh soup;
    for (;;) {
        const auto tok = in.next();
        if (tok.empty()) throw MalformedAscii("missing 'endsolid'");
        if (tok == "endsolid") break;
        if (tok != "facet")
            throw MalformedAscii(fmt::format("expected 'facet' but found '{}'", tok));
        in.expect("normal");
        for (int i = 0; i < 3; ++i) in.number();
        in.expect("outer");
        in.expect("loop");
        for (int c = 0; c < 3; ++c) {
            in.expect("vertex");
            const double x = in.number();
            const double y = in.number();
            const double z = in.number();
            soup.corners.emplace_back(x, y, z);
        }
        in.expect("endloop");
        in.expect("endfacet");
    }
    return soup;
}

bool starts_with_solid(std::span<const std::uint8_t> bytes) {
    std::size_t i = 0;
    while (i < bytes.size() && std::isspace(bytes[i])) ++i;
    return bytes.size() - i >= 5 && std::memcmp(bytes.data() + i, "solid", 5) == 0;
}

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey &) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey &k) const noexcept {
        std::size_t h = static_cast<std::size_t>(k.x) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::size_t>(k.y) + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
        h ^= static_cast<std::size_t>(k.z) + 0x85EBCA77C2B2AE63ull + (h << 6) + (h >> 2);
        return h;
    }
};

TriangleMesh weld(const SoupMesh &soup, StlFormat format) {
    if (soup.corners.empty()) throw EmptyMesh("STL contains zero facets");
    for (const auto &p : soup.corners)
        if (!p.allFinite()) throw InvalidMesh("non-finite vertex coordinate");

    Eigen::Vector3d lo = soup.corners.front(), hi = lo;
    for (const auto &p : soup.corners) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double tol = 1e-9 * (hi - lo).norm();

    std::vector<Eigen::Vector3d> unique;
    std::vector<int> remap(soup.corners.size());
    if (tol == 0.0) {
        // all corners coincide
        unique.push_back(soup.corners.front());
        std::fill(remap.begin(), remap.end(), 0);
    } else {
        std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
        auto cell_of = [&](const Eigen::Vector3d &p) {
            const Eigen::Vector3d q = ((p - lo) / tol).array().floor();
            return CellKey{static_cast<std::int64_t>(q.x()), static_cast<std::int64_t>(q.y()),
                           static_cast<std::int64_t>(q.z())};
        };
        for (std::size_t i = 0; i < soup.corners.size(); ++i) {
            const auto &p = soup.corners[i];
            const CellKey key = cell_of(p);
            int found = -1;
            for (int dx = -1; dx <= 1 && found < 0; ++dx)
                for (int dy = -1; dy <= 1 && found < 0; ++dy)
                    for (int dz = -1; dz <= 1 && found < 0; ++dz) {
                        const auto it = grid.find({key.x + dx, key.y + dy, key.z + dz});
                        if (it == grid.end()) continue;
                        for (int idx : it->second)
                            if ((unique[idx] - p).norm() <= tol) {
                                found = idx;
                                break;
                            }
                    }
            if (found < 0) {
                found = static_cast<int>(unique.size());
                unique.push_back(p);
                grid[key].push_back(found);
            }
            remap[i] = found;
        }
    }

    Vertices v(static_cast<Eigen::Index>(unique.size()), 3);
    for (std::size_t i = 0; i < unique.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = unique[i];
    Faces f(static_cast<Eigen::Index>(soup.corners.size() / 3), 3);
    for (Eigen::Index r = 0; r < f.rows(); ++r)
        for (int c = 0; c < 3; ++c) f(r, c) = remap[static_cast<std::size_t>(3 * r + c)];
    return TriangleMesh(std::move(v), std::move(f), format);
}

} // namespace

TriangleMesh::TriangleMesh(Vertices vertices, Faces faces, StlFormat source_format)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), format_(source_format) {
    if (faces_.rows() < 1) throw EmptyMesh("mesh has no faces");
    if (vertices_.rows() < 3)
        throw InvalidMesh(fmt::format("mesh has {} vertices, need at least 3", vertices_.rows()));
    if (!vertices_.allFinite()) throw InvalidMesh("non-finite vertex coordinate");
    if (faces_.minCoeff() < 0 || faces_.maxCoeff() >= vertices_.rows())
        throw InvalidMesh("face index out of range");
}

TriangleMesh parse_stl(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw EmptyMesh("empty STL byte stream");
    if (bytes.size() >= kHeaderBytes + 4) {
        const std::uint64_t count = read_u32(bytes.data() + kHeaderBytes);
        const std::uint64_t expected = kHeaderBytes + 4 + kFacetBytes * count;
        if (expected == bytes.size())
            return weld(parse_binary(bytes, static_cast<std::uint32_t>(count)), StlFormat::Binary);
        if (!starts_with_solid(bytes) && expected > bytes.size())
            throw TruncatedFile(fmt::format("declared {} facets ({} bytes) but file has {} bytes",
                                            count, expected, bytes.size()));
    }
    return weld(parse_ascii(bytes), StlFormat::Ascii);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound(fmt::format("file not found: {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TriangleMesh read_stl(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    return parse_stl(bytes);
}

Vertices face_normals(const Vertices &vertices, const Faces &faces) {
    Vertices n(faces.rows(), 3);
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        const Eigen::Vector3d a = vertices.row(faces(f, 0));
        const Eigen::Vector3d b = vertices.row(faces(f, 1));
        const Eigen::Vector3d c = vertices.row(faces(f, 2));
        const Eigen::Vector3d cr = (b - a).cross(c - a);
        const double len = cr.norm();
        n.row(f) = len > 0.0 ? Eigen::Vector3d(cr / len) : Eigen::Vector3d::Zero();
    }
    return n;
}

std::vector<std::uint8_t> to_binary_stl(const Vertices &vertices, const Faces &faces,
                                        std::string_view header) {
    std::vector<std::uint8_t> out(kHeaderBytes + 4 + kFacetBytes * static_cast<std::size_t>(faces.rows()), 0);
    std::memcpy(out.data(), header.data(), std::min(header.size(), kHeaderBytes));
    const auto count = static_cast<std::uint32_t>(faces.rows());
    std::memcpy(out.data() + kHeaderBytes, &count, 4);

    const Vertices normals = face_normals(vertices, faces);
    std::uint8_t *rec = out.data() + kHeaderBytes + 4;
    auto put = [](std::uint8_t *dst, const Eigen::Vector3d &v) {
        const std::array<float, 3> f{static_cast<float>(v.x()), static_cast<float>(v.y()),
                                     static_cast<float>(v.z())};
        std::memcpy(dst, f.data(), 12);
    };
    for (Eigen::Index f = 0; f < faces.rows(); ++f, rec += kFacetBytes) {
        put(rec, normals.row(f).transpose());
        for (int c = 0; c < 3; ++c) put(rec + 12 + 12 * c, vertices.row(faces(f, c)).transpose());
    }
    return out;
}

void write_binary_stl(const std::filesystem::path &path, const Vertices &vertices,
                      const Faces &faces) {
    const auto bytes = to_binary_stl(vertices, faces);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileNotFound(fmt::format("cannot open for writing: {}", path.string()));
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Eigen::Vector3d centroid(const TriangleMesh &mesh) {
    return mesh.vertices().colwise().mean().transpose();
}

Point2Set occlusal_projection(const TriangleMesh &mesh) {
    Point2Set out;
    out.origin_offset = mesh.vertices().leftCols<2>().colwise().mean().transpose();
    out.points = mesh.vertices().leftCols<2>().rowwise() - out.origin_offset.transpose();
    return out;
}

} // namespace archmap
