#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace svf {

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BoundaryTag : std::uint8_t { Gamma0, Gamma1 };

struct BoundaryEdge {
    int a = -1, b = -1;
    BoundaryTag tag = BoundaryTag::Gamma1;
};

/// Conforming 2D triangulation with tagged boundary edges and derived
/// adjacency (edge table, vertex->triangle incidence). Immutable once built.
class Mesh {
public:
    Mesh(std::vector<std::array<double, 2>> vertices,
         std::vector<std::array<int, 3>> triangles,
         std::vector<BoundaryEdge> boundary_edges)
        : vertices_(std::move(vertices)),
          triangles_(std::move(triangles)),
          boundary_edges_(std::move(boundary_edges))
    {
        build_and_check();
    }

    int n_vertices() const { return static_cast<int>(vertices_.size()); }
    int n_triangles() const { return static_cast<int>(triangles_.size()); }
    int n_edges() const { return static_cast<int>(edges_.size()); }

    const std::array<double, 2>& vertex(int i) const { return vertices_[i]; }
    const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }

    /// Edge endpoints sorted (a < b).
    const std::array<int, 2>& edge(int e) const { return edges_[e]; }
    int edge_id(int a, int b) const
    {
        auto it = edge_ids_.find(key(a, b));
        if (it == edge_ids_.end()) throw MeshError("edge_id: no such edge");
        return it->second;
    }
    /// Local edges of triangle t in the order (v0,v1), (v1,v2), (v2,v0).
    const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[t]; }
    const std::vector<int>& vertex_triangles(int v) const { return vertex_tris_[v]; }

    bool is_boundary_vertex(int v) const { return boundary_vertex_[v]; }
    /// Tag of boundary edge (a,b); throws if not a boundary edge.
    BoundaryTag boundary_tag(int a, int b) const
    {
        auto it = boundary_tags_.find(key(a, b));
        if (it == boundary_tags_.end()) throw MeshError("not a boundary edge");
        return it->second;
    }
    bool is_boundary_edge(int a, int b) const
    {
        return boundary_tags_.count(key(a, b)) > 0;
    }
    bool has_gamma0() const
    {
        for (const auto& be : boundary_edges_)
            if (be.tag == BoundaryTag::Gamma0) return true;
        return false;
    }
    /// True when the whole boundary is Gamma0 (enclosed flow).
    bool enclosed() const
    {
        for (const auto& be : boundary_edges_)
            if (be.tag == BoundaryTag::Gamma1) return false;
        return true;
    }

    double triangle_area(int t) const { return areas_[t]; }
    double total_area() const
    {
        double s = 0.0;
        for (double a : areas_) s += a;
        return s;
    }

    /// Angle of triangle t at its local vertex lv.
    double corner_angle(int t, int lv) const
    {
        const auto& tri = triangles_[t];
        const auto& p = vertices_[tri[lv]];
        const auto& q = vertices_[tri[(lv + 1) % 3]];
        const auto& r = vertices_[tri[(lv + 2) % 3]];
        const double ux = q[0] - p[0], uy = q[1] - p[1];
        const double vx = r[0] - p[0], vy = r[1] - p[1];
        return std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy);
    }

    int local_vertex(int t, int v) const
    {
        for (int i = 0; i < 3; ++i)
            if (triangles_[t][i] == v) return i;
        throw MeshError("local_vertex: vertex not in triangle");
    }

    void write(std::ostream& os) const;
    void write(const std::string& path) const
    {
        std::ofstream f(path);
        if (!f) throw MeshError("cannot open " + path);
        write(f);
    }
    static Mesh read(std::istream& is);
    static Mesh read(const std::string& path)
    {
        std::ifstream f(path);
        if (!f) throw MeshError("cannot open " + path);
        return read(f);
    }

private:
    static std::int64_t key(int a, int b)
    {
        if (a > b) std::swap(a, b);
        return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    }

    void build_and_check()
    {
        areas_.resize(triangles_.size());
        std::map<std::int64_t, int> edge_count;
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            const auto& tri = triangles_[t];
            for (int i = 0; i < 3; ++i)
                if (tri[i] < 0 || tri[i] >= n_vertices())
                    throw MeshError("triangle vertex index out of range");
            const auto& p0 = vertices_[tri[0]];
            const auto& p1 = vertices_[tri[1]];
            const auto& p2 = vertices_[tri[2]];
            const double a2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) -
                              (p1[1] - p0[1]) * (p2[0] - p0[0]);
            if (a2 <= 0.0)
                throw MeshError("triangle with nonpositive signed area");
            areas_[t] = 0.5 * a2;
            for (int i = 0; i < 3; ++i)
                edge_count[key(tri[i], tri[(i + 1) % 3])]++;
        }

        // conformity: interior edges shared by 2 triangles, boundary by 1
        std::set<std::int64_t> tagged;
        for (const auto& be : boundary_edges_) {
            const auto k = key(be.a, be.b);
            auto it = edge_count.find(k);
            if (it == edge_count.end() || it->second != 1)
                throw MeshError("boundary edge not matched by exactly one triangle");
            if (!tagged.insert(k).second)
                throw MeshError("boundary edge tagged twice");
            boundary_tags_[k] = be.tag;
        }
        for (const auto& [k, c] : edge_count) {
            if (c == 1 && tagged.count(k) == 0)
                throw MeshError("untagged boundary edge");
            if (c > 2)
                throw MeshError("non-conforming mesh: edge shared by >2 triangles");
        }

        // edge table
        edges_.reserve(edge_count.size());
        for (const auto& [k, c] : edge_count) {
            const int a = static_cast<int>(k >> 32);
            const int b = static_cast<int>(k & 0xffffffff);
            edge_ids_[k] = static_cast<int>(edges_.size());
            edges_.push_back({a, b});
        }
        tri_edges_.resize(triangles_.size());
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            const auto& tri = triangles_[t];
            for (int i = 0; i < 3; ++i)
                tri_edges_[t][i] = edge_ids_[key(tri[i], tri[(i + 1) % 3])];
        }

        vertex_tris_.assign(vertices_.size(), {});
        for (std::size_t t = 0; t < triangles_.size(); ++t)
            for (int i = 0; i < 3; ++i)
                vertex_tris_[triangles_[t][i]].push_back(static_cast<int>(t));

        boundary_vertex_.assign(vertices_.size(), false);
        for (const auto& be : boundary_edges_) {
            boundary_vertex_[be.a] = true;
            boundary_vertex_[be.b] = true;
        }
    }

    std::vector<std::array<double, 2>> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;

    std::vector<double> areas_;
    std::vector<std::array<int, 2>> edges_;
    std::map<std::int64_t, int> edge_ids_;
    std::vector<std::array<int, 3>> tri_edges_;
    std::vector<std::vector<int>> vertex_tris_;
    std::vector<bool> boundary_vertex_;
    std::map<std::int64_t, BoundaryTag> boundary_tags_;
};

inline void Mesh::write(std::ostream& os) const
{
    os.precision(17);
    for (const auto& v : vertices_)
        os << "v " << v[0] << " " << v[1] << "\n";
    for (const auto& t : triangles_)
        os << "t " << t[0] << " " << t[1] << " " << t[2] << "\n";
    for (const auto& b : boundary_edges_)
        os << "b " << b.a << " " << b.b << " "
           << (b.tag == BoundaryTag::Gamma0 ? "g0" : "g1") << "\n";
}

inline Mesh Mesh::read(std::istream& is)
{
    std::vector<std::array<double, 2>> vs;
    std::vector<std::array<int, 3>> ts;
    std::vector<BoundaryEdge> bs;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "v") {
            std::array<double, 2> v{};
            ss >> v[0] >> v[1];
            vs.push_back(v);
        } else if (kind == "t") {
            std::array<int, 3> t{};
            ss >> t[0] >> t[1] >> t[2];
            ts.push_back(t);
        } else if (kind == "b") {
            BoundaryEdge b;
            std::string tag;
            ss >> b.a >> b.b >> tag;
            if (tag == "g0") b.tag = BoundaryTag::Gamma0;
            else if (tag == "g1") b.tag = BoundaryTag::Gamma1;
            else throw MeshError("bad boundary tag: " + tag);
            bs.push_back(b);
        } else {
            throw MeshError("bad mesh record: " + line);
        }
        if (ss.fail()) throw MeshError("malformed mesh line: " + line);
    }
    return Mesh(std::move(vs), std::move(ts), std::move(bs));
}

/// The 8-triangle initial triangulation of the unit square: quartered at the
/// midlines, each subsquare split along the (1,0)-(0,1) diagonal direction.
/// Boundary edges on {x=0} are tagged Gamma0, all others Gamma1.
inline Mesh unit_square_initial()
{
    std::vector<std::array<double, 2>> vs = {
        {0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0},
        {0.0, 0.5}, {0.5, 0.5}, {1.0, 0.5},
        {0.0, 1.0}, {0.5, 1.0}, {1.0, 1.0}};
    std::vector<std::array<int, 3>> ts = {
        {0, 1, 3}, {1, 4, 3},   // lower-left, cut (1/2,0)-(0,1/2)
        {1, 2, 4}, {2, 5, 4},   // lower-right, cut (1,0)-(1/2,1/2)
        {3, 4, 6}, {4, 7, 6},   // upper-left, cut (1/2,1/2)-(0,1)
        {4, 5, 7}, {5, 8, 7}};  // upper-right, cut (1,1/2)-(1/2,1)
    std::vector<BoundaryEdge> bs = {
        {0, 3, BoundaryTag::Gamma0}, {3, 6, BoundaryTag::Gamma0},
        {0, 1, BoundaryTag::Gamma1}, {1, 2, BoundaryTag::Gamma1},
        {2, 5, BoundaryTag::Gamma1}, {5, 8, BoundaryTag::Gamma1},
        {8, 7, BoundaryTag::Gamma1}, {7, 6, BoundaryTag::Gamma1}};
    return Mesh(std::move(vs), std::move(ts), std::move(bs));
}

/// Red refinement: every triangle split into four congruent children at the
/// edge midpoints; boundary tags are inherited.
inline Mesh uniform_refine(const Mesh& m)
{
    std::vector<std::array<double, 2>> vs;
    vs.reserve(m.n_vertices() + m.n_edges());
    for (int v = 0; v < m.n_vertices(); ++v) vs.push_back(m.vertex(v));
    std::vector<int> edge_mid(m.n_edges());
    for (int e = 0; e < m.n_edges(); ++e) {
        const auto& [a, b] = m.edge(e);
        edge_mid[e] = static_cast<int>(vs.size());
        vs.push_back({0.5 * (m.vertex(a)[0] + m.vertex(b)[0]),
                      0.5 * (m.vertex(a)[1] + m.vertex(b)[1])});
    }

    std::vector<std::array<int, 3>> ts;
    ts.reserve(4 * m.n_triangles());
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto& tri = m.triangle(t);
        const auto& te = m.triangle_edges(t);
        const int m01 = edge_mid[te[0]], m12 = edge_mid[te[1]], m20 = edge_mid[te[2]];
        ts.push_back({tri[0], m01, m20});
        ts.push_back({m01, tri[1], m12});
        ts.push_back({m20, m12, tri[2]});
        ts.push_back({m01, m12, m20});
    }

    std::vector<BoundaryEdge> bs;
    bs.reserve(2 * m.boundary_edges().size());
    for (const auto& be : m.boundary_edges()) {
        const int mid = edge_mid[m.edge_id(be.a, be.b)];
        bs.push_back({be.a, mid, be.tag});
        bs.push_back({mid, be.b, be.tag});
    }
    return Mesh(std::move(vs), std::move(ts), std::move(bs));
}

} // namespace svf
