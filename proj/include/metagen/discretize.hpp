#pragma once

#include <zlib.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <vector>

#include "metagen/assembly.hpp"
#include "metagen/core.hpp"
#include "metagen/errors.hpp"

namespace metagen::discretize {

using assembly::StructureIR;
using assembly::StructurePtr;

// ---------------------------------------------------------------------------
// Voxel grids

/// Center-sampled occupancy of the unit cell at resolution R^3.
struct VoxelGrid {
    int resolution = 0;
    std::vector<uint8_t> occupancy;  // x-major: idx = (i*R + j)*R + k

    bool at(int i, int j, int k) const {
        const int R = resolution;
        return occupancy[size_t((i * R + j) * R + k)] != 0;
    }
    uint8_t& at(int i, int j, int k) {
        const int R = resolution;
        return occupancy[size_t((i * R + j) * R + k)];
    }
    /// Periodic lookup, used by the tiling checks.
    bool at_periodic(long i, long j, long k) const {
        const long R = resolution;
        auto wrap = [R](long v) { return ((v % R) + R) % R; };
        return at(int(wrap(i)), int(wrap(j)), int(wrap(k)));
    }

    long occupied_count() const {
        long n = 0;
        for (uint8_t v : occupancy) n += v != 0;
        return n;
    }
    double volume_fraction() const {
        return double(occupied_count()) / double(occupancy.size());
    }
};

inline void check_resolution(int R) {
    if (R < 2 || R > 512)
        fail("ResolutionRange", "resolution must be in [2, 512], got " + std::to_string(R));
}

/// Center-sampled by default; `supersample` = n takes n^3 stratified samples
/// per voxel and marks cells filled by majority.
inline VoxelGrid voxelize(const StructureIR& ir, int R, int threads = 1, int supersample = 1) {
    check_resolution(R);
    VoxelGrid grid;
    grid.resolution = R;
    grid.occupancy.assign(size_t(R) * R * R, 0);

    const int ss = std::max(1, supersample);
    auto slab = [&](int i0, int i1) {
        for (int i = i0; i < i1; ++i)
            for (int j = 0; j < R; ++j)
                for (int k = 0; k < R; ++k) {
                    if (ss == 1) {
                        Vec3 p{(i + 0.5) / R, (j + 0.5) / R, (k + 0.5) / R};
                        grid.at(i, j, k) = assembly::structure_field(ir, p) < 0.0 ? 1 : 0;
                        continue;
                    }
                    int inside = 0;
                    for (int a = 0; a < ss; ++a)
                        for (int b = 0; b < ss; ++b)
                            for (int c = 0; c < ss; ++c) {
                                Vec3 p{(i + (a + 0.5) / ss) / R, (j + (b + 0.5) / ss) / R,
                                       (k + (c + 0.5) / ss) / R};
                                inside += assembly::structure_field(ir, p) < 0.0;
                            }
                    grid.at(i, j, k) = inside * 2 > ss * ss * ss ? 1 : 0;
                }
    };
    int nthreads = std::max(1, threads);
    if (nthreads == 1) {
        slab(0, R);
    } else {
        std::vector<std::thread> pool;
        int chunk = (R + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            int i0 = t * chunk, i1 = std::min(R, i0 + chunk);
            if (i0 < i1) pool.emplace_back(slab, i0, i1);
        }
        for (auto& th : pool) th.join();
    }
    return grid;
}

inline VoxelGrid voxelize(const StructurePtr& ir, int R, int threads = 1) {
    return voxelize(*ir, R, threads);
}

// ---------------------------------------------------------------------------
// Mesh extraction (marching tetrahedra on the Kuhn subdivision)

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> normals;  // per triangle

    /// Signed volume via the divergence theorem.
    double signed_volume() const {
        double v = 0;
        for (const auto& t : triangles)
            v += dot(vertices[t[0]], cross(vertices[t[1]], vertices[t[2]])) / 6.0;
        return v;
    }
};

namespace detail {

struct VertexWelder {
    static constexpr double kTol = 1e-7;
    std::unordered_map<uint64_t, std::vector<int>> buckets;
    std::vector<Vec3>& verts;

    explicit VertexWelder(std::vector<Vec3>& v) : verts(v) {}

    static uint64_t key(long a, long b, long c) {
        return (uint64_t(a) * 0x9E3779B1u) ^ (uint64_t(b) * 0x85EBCA77u) ^
               (uint64_t(c) * 0xC2B2AE3Du);
    }

    int add(const Vec3& p) {
        long qa = long(std::floor(p.x / kTol)), qb = long(std::floor(p.y / kTol)),
             qc = long(std::floor(p.z / kTol));
        for (long da = -1; da <= 1; ++da)
            for (long db = -1; db <= 1; ++db)
                for (long dc = -1; dc <= 1; ++dc) {
                    auto it = buckets.find(key(qa + da, qb + db, qc + dc));
                    if (it == buckets.end()) continue;
                    for (int idx : it->second)
                        if (std::abs(verts[idx].x - p.x) <= kTol &&
                            std::abs(verts[idx].y - p.y) <= kTol &&
                            std::abs(verts[idx].z - p.z) <= kTol)
                            return idx;
                }
        int idx = int(verts.size());
        verts.push_back(p);
        buckets[key(qa, qb, qc)].push_back(idx);
        return idx;
    }
};

// The six Kuhn tetrahedra of a cell, as corner-bit chains 000 -> 111. Every
// cell uses the same main diagonal, so faces match across cells.
constexpr int kKuhnTets[6][4] = {
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
};

}  // namespace detail

/// Extract the iso-0 surface of the signed field sampled on an (R+1)^3
/// lattice over the unit cell, with one ghost layer of void so solids
/// touching the cell walls still yield a watertight mesh.
inline TriMesh extract_mesh(const StructureIR& ir, int R) {
    check_resolution(R);
    const int N = R + 3;  // samples at indices -1 .. R+1 per axis
    const double ghost = 1e6;
    std::vector<double> field(size_t(N) * N * N);
    auto sample = [&](int i, int j, int k) -> double& {
        return field[size_t((i * N + j) * N + k)];
    };
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                int gi = i - 1, gj = j - 1, gk = k - 1;
                if (gi < 0 || gi > R || gj < 0 || gj > R || gk < 0 || gk > R) {
                    sample(i, j, k) = ghost;
                } else {
                    Vec3 p{double(gi) / R, double(gj) / R, double(gk) / R};
                    sample(i, j, k) = assembly::structure_field(ir, p);
                }
            }

    TriMesh mesh;
    detail::VertexWelder welder(mesh.vertices);
    auto corner_pos = [&](int i, int j, int k) {
        return Vec3{double(i - 1) / R, double(j - 1) / R, double(k - 1) / R};
    };

    bool any_crossing = false;
    for (int i = 0; i + 1 < N; ++i)
        for (int j = 0; j + 1 < N; ++j)
            for (int k = 0; k + 1 < N; ++k) {
                double f[8];
                Vec3 p[8];
                for (int b = 0; b < 8; ++b) {
                    int bi = i + (b & 1), bj = j + ((b >> 1) & 1), bk = k + ((b >> 2) & 1);
                    f[b] = sample(bi, bj, bk);
                    p[b] = corner_pos(bi, bj, bk);
                }
                bool any_neg = f[0] < 0 || f[1] < 0 || f[2] < 0 || f[3] < 0 || f[4] < 0 ||
                               f[5] < 0 || f[6] < 0 || f[7] < 0;
                bool any_pos = f[0] >= 0 || f[1] >= 0 || f[2] >= 0 || f[3] >= 0 || f[4] >= 0 ||
                               f[5] >= 0 || f[6] >= 0 || f[7] >= 0;
                if (!any_neg || !any_pos) continue;

                for (const auto& tet : detail::kKuhnTets) {
                    double tf[4];
                    Vec3 tp[4];
                    int neg = 0;
                    for (int v = 0; v < 4; ++v) {
                        tf[v] = f[tet[v]];
                        tp[v] = p[tet[v]];
                        if (tf[v] < 0) ++neg;
                    }
                    if (neg == 0 || neg == 4) continue;
                    any_crossing = true;

                    auto crossing = [&](int a, int b) {
                        double t = tf[a] / (tf[a] - tf[b]);
                        return welder.add(lerp(tp[a], tp[b], t));
                    };
                    // linear gradient over the tet orients the triangles
                    Vec3 e1 = tp[1] - tp[0], e2 = tp[2] - tp[0], e3 = tp[3] - tp[0];
                    double d1 = tf[1] - tf[0], d2 = tf[2] - tf[0], d3 = tf[3] - tf[0];
                    Vec3 r1 = cross(e2, e3), r2 = cross(e3, e1), r3 = cross(e1, e2);
                    double det = dot(e1, r1);
                    Vec3 grad = det != 0 ? (r1 * d1 + r2 * d2 + r3 * d3) / det : Vec3{0, 0, 1};

                    auto emit = [&](int a, int b, int c) {
                        if (a == b || b == c || a == c) return;
                        Vec3 n = cross(mesh.vertices[b] - mesh.vertices[a],
                                       mesh.vertices[c] - mesh.vertices[a]);
                        if (norm(n) < 1e-18) return;  // degenerate after welding
                        if (dot(n, grad) < 0) std::swap(b, c);
                        mesh.triangles.push_back({a, b, c});
                    };

                    std::array<int, 4> inside, outside;
                    int ni = 0, no = 0;
                    for (int v = 0; v < 4; ++v) (tf[v] < 0 ? inside[ni++] : outside[no++]) = v;
                    if (neg == 1) {
                        emit(crossing(inside[0], outside[0]), crossing(inside[0], outside[1]),
                             crossing(inside[0], outside[2]));
                    } else if (neg == 3) {
                        emit(crossing(inside[0], outside[0]), crossing(inside[1], outside[0]),
                             crossing(inside[2], outside[0]));
                    } else {
                        int a0 = crossing(inside[0], outside[0]);
                        int a1 = crossing(inside[0], outside[1]);
                        int b0 = crossing(inside[1], outside[0]);
                        int b1 = crossing(inside[1], outside[1]);
                        emit(a0, a1, b1);
                        emit(a0, b1, b0);
                    }
                }
            }
    if (!any_crossing) fail("EmptyMesh", "the field has no sign change anywhere in the cell");

    mesh.normals.reserve(mesh.triangles.size());
    for (auto& t : mesh.triangles)
        mesh.normals.push_back(normalized(cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                                                mesh.vertices[t[2]] - mesh.vertices[t[0]])));
    return mesh;
}

inline TriMesh extract_mesh(const StructurePtr& ir, int R) { return extract_mesh(*ir, R); }

/// Debug mesher: the raw voxel surface (boundary quads of occupied cells,
/// split into triangles). Blocky but exactly matches the grid.
inline TriMesh extract_voxel_surface(const VoxelGrid& grid) {
    const int R = grid.resolution;
    TriMesh mesh;
    detail::VertexWelder welder(mesh.vertices);
    auto occupied = [&](int i, int j, int k) {
        if (i < 0 || j < 0 || k < 0 || i >= R || j >= R || k >= R) return false;
        return grid.at(i, j, k);
    };
    auto corner = [&](int i, int j, int k) {
        return welder.add(Vec3{double(i) / R, double(j) / R, double(k) / R});
    };
    static const int face_corners[6][4][3] = {
        {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}},  // +x
        {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}},  // -x
        {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}},  // +y
        {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}},  // -y
        {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}},  // +z
        {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}},  // -z
    };
    static const int neighbor[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                       {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                if (!grid.at(i, j, k)) continue;
                for (int f = 0; f < 6; ++f) {
                    if (occupied(i + neighbor[f][0], j + neighbor[f][1], k + neighbor[f][2]))
                        continue;
                    int v[4];
                    for (int c = 0; c < 4; ++c)
                        v[c] = corner(i + face_corners[f][c][0], j + face_corners[f][c][1],
                                      k + face_corners[f][c][2]);
                    mesh.triangles.push_back({v[0], v[1], v[2]});
                    mesh.triangles.push_back({v[0], v[2], v[3]});
                }
            }
    mesh.normals.reserve(mesh.triangles.size());
    for (auto& t : mesh.triangles)
        mesh.normals.push_back(normalized(cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                                                mesh.vertices[t[2]] - mesh.vertices[t[0]])));
    return mesh;
}

inline void export_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) fail("IoFailure", "cannot open " + path + " for writing");
    std::string buf;
    buf.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
    char line[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        buf += line;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(line, sizeof(line), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        buf += line;
    }
    out << buf;
    if (!out.good()) fail("IoFailure", "failed while writing " + path);
}

inline TriMesh import_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) fail("IoFailure", "cannot open " + path);
    TriMesh mesh;
    std::string tag;
    while (in >> tag) {
        if (tag == "v") {
            Vec3 v;
            in >> v.x >> v.y >> v.z;
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t;
            in >> t[0] >> t[1] >> t[2];
            mesh.triangles.push_back({t[0] - 1, t[1] - 1, t[2] - 1});
        } else {
            std::string rest;
            std::getline(in, rest);
        }
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// Orthographic renders

struct RenderImage {
    int width = 0, height = 0;
    std::vector<uint8_t> pixels;  // RGB rows, top to bottom

    uint8_t* at(int x, int y) { return &pixels[size_t(y * width + x) * 3]; }
    const uint8_t* at(int x, int y) const { return &pixels[size_t(y * width + x) * 3]; }
};

namespace detail {

struct Camera {
    Vec3 forward, right, up;
};

inline std::array<Camera, 4> view_cameras() {
    // x = right, y = back (depth), z = up
    Camera front{{0, 1, 0}, {1, 0, 0}, {0, 0, 1}};
    Camera top{{0, 0, -1}, {1, 0, 0}, {0, 1, 0}};
    Camera right{{-1, 0, 0}, {0, -1, 0}, {0, 0, 1}};
    Vec3 fwd = normalized(Vec3{-1, 1, -1});
    Vec3 r = normalized(cross(fwd, Vec3{0, 0, 1}));
    Vec3 u = cross(r, fwd);
    Camera angled{fwd, r, u};
    return {front, top, right, angled};
}

inline RenderImage render_one(const TriMesh& mesh, const Camera& cam, int size) {
    RenderImage img;
    img.width = img.height = size;
    img.pixels.assign(size_t(size) * size * 3, 255);
    std::vector<double> zbuf(size_t(size) * size, std::numeric_limits<double>::infinity());

    // Fit the projected unit cell with equal scale.
    double ulo = 1e30, uhi = -1e30, vlo = 1e30, vhi = -1e30;
    for (int c = 0; c < 8; ++c) {
        Vec3 p{double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)};
        double u = dot(p, cam.right), v = dot(p, cam.up);
        ulo = std::min(ulo, u);
        uhi = std::max(uhi, u);
        vlo = std::min(vlo, v);
        vhi = std::max(vhi, v);
    }
    double span = std::max(uhi - ulo, vhi - vlo);
    double ucenter = (ulo + uhi) / 2, vcenter = (vlo + vhi) / 2;
    auto to_pixel = [&](const Vec3& p, double& px, double& py, double& depth) {
        double u = dot(p, cam.right), v = dot(p, cam.up);
        px = ((u - ucenter) / span + 0.5) * size;
        py = (0.5 - (v - vcenter) / span) * size;  // rows top to bottom
        depth = dot(p, cam.forward);
    };

    for (size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& t = mesh.triangles[ti];
        double x[3], y[3], z[3];
        for (int v = 0; v < 3; ++v) to_pixel(mesh.vertices[t[v]], x[v], y[v], z[v]);
        double shade = std::abs(dot(mesh.normals[ti], cam.forward));
        uint8_t gray = uint8_t(std::clamp(shade * 255.0, 0.0, 255.0));

        int x0 = std::max(0, int(std::floor(std::min({x[0], x[1], x[2]}))));
        int x1 = std::min(size - 1, int(std::ceil(std::max({x[0], x[1], x[2]}))));
        int y0 = std::max(0, int(std::floor(std::min({y[0], y[1], y[2]}))));
        int y1 = std::min(size - 1, int(std::ceil(std::max({y[0], y[1], y[2]}))));
        double area = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
        if (std::abs(area) < 1e-12) continue;
        for (int py = y0; py <= y1; ++py)
            for (int px = x0; px <= x1; ++px) {
                double cx = px + 0.5, cy = py + 0.5;
                double w0 = (x[1] - cx) * (y[2] - cy) - (x[2] - cx) * (y[1] - cy);
                double w1 = (x[2] - cx) * (y[0] - cy) - (x[0] - cx) * (y[2] - cy);
                double w2 = (x[0] - cx) * (y[1] - cy) - (x[1] - cx) * (y[0] - cy);
                bool inside = (w0 >= 0 && w1 >= 0 && w2 >= 0) || (w0 <= 0 && w1 <= 0 && w2 <= 0);
                if (!inside) continue;
                double depth = (w0 * z[0] + w1 * z[1] + w2 * z[2]) / (w0 + w1 + w2);
                size_t idx = size_t(py * size + px);
                if (depth < zbuf[idx]) {
                    zbuf[idx] = depth;
                    uint8_t* pix = img.at(px, py);
                    pix[0] = pix[1] = pix[2] = gray;
                }
            }
    }
    return img;
}

}  // namespace detail

/// Orthographic renders from the front, top, right, and front-top-right
/// viewpoints, flat shaded with the light along the view direction.
inline std::array<RenderImage, 4> render_views(const TriMesh& mesh, int size = 512) {
    if (mesh.triangles.empty()) fail("EmptyMesh", "cannot render an empty mesh");
    auto cams = detail::view_cameras();
    return {detail::render_one(mesh, cams[0], size), detail::render_one(mesh, cams[1], size),
            detail::render_one(mesh, cams[2], size), detail::render_one(mesh, cams[3], size)};
}

inline const std::array<const char*, 4>& view_names() {
    static const std::array<const char*, 4> names = {"front", "top", "right", "angled"};
    return names;
}

// ---------------------------------------------------------------------------
// Image writers

inline void write_ppm(const RenderImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) fail("IoFailure", "cannot open " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    if (!out.good()) fail("IoFailure", "failed while writing " + path);
}

namespace detail {

inline void png_chunk(std::ofstream& out, const char* type, const std::vector<uint8_t>& data) {
    auto be32 = [](uint32_t v) {
        return std::array<uint8_t, 4>{uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8),
                                      uint8_t(v)};
    };
    auto len = be32(uint32_t(data.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 4);
    out.write(type, 4);
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), uInt(data.size()));
    auto crc_bytes = be32(uint32_t(crc));
    out.write(reinterpret_cast<const char*>(crc_bytes.data()), 4);
}

}  // namespace detail

inline void write_png(const RenderImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) fail("IoFailure", "cannot open " + path);
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr(13);
    auto put32 = [&](std::vector<uint8_t>& v, size_t off, uint32_t x) {
        v[off] = uint8_t(x >> 24);
        v[off + 1] = uint8_t(x >> 16);
        v[off + 2] = uint8_t(x >> 8);
        v[off + 3] = uint8_t(x);
    };
    put32(ihdr, 0, uint32_t(img.width));
    put32(ihdr, 4, uint32_t(img.height));
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    detail::png_chunk(out, "IHDR", ihdr);

    // filter byte 0 per scanline
    std::vector<uint8_t> raw;
    raw.reserve(size_t(img.height) * (size_t(img.width) * 3 + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), img.pixels.begin() + size_t(y) * img.width * 3,
                   img.pixels.begin() + size_t(y + 1) * img.width * 3);
    }
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        fail("IoFailure", "png compression failed");
    compressed.resize(bound);
    detail::png_chunk(out, "IDAT", compressed);
    detail::png_chunk(out, "IEND", {});
    if (!out.good()) fail("IoFailure", "failed while writing " + path);
}

}  // namespace metagen::discretize
