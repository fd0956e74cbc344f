#pragma once

#include "svflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace svf {

enum class VertexClass { Interior, BoundaryGamma0Interior, BoundaryOther };

struct VertexInfo {
    VertexClass vclass = VertexClass::Interior;
    bool is_singular = false;
    /// Triangle fan K_1..K_m ordered counterclockwise; for boundary vertices
    /// the fan starts at a boundary edge.
    std::vector<int> fan;
    std::vector<double> angles;
    double xi = 0.0;
};

/// Threshold below which |sin(theta_i + theta_{i+1})| counts as exact
/// collinearity.
inline constexpr double kSingularSineTol = 1e-12;

class VertexClassification {
public:
    explicit VertexClassification(const Mesh& mesh) : mesh_(&mesh)
    {
        info_.resize(mesh.n_vertices());
        for (int v = 0; v < mesh.n_vertices(); ++v) classify(v);
    }

    const Mesh& mesh() const { return *mesh_; }
    const VertexInfo& info(int v) const { return info_[v]; }
    int n_vertices() const { return static_cast<int>(info_.size()); }

    bool in_xi_domain(int v) const
    {
        const auto c = info_[v].vclass;
        return c == VertexClass::Interior || c == VertexClass::BoundaryGamma0Interior;
    }

    /// xi_a = sum over consecutive fan pairs of |sin(theta_i + theta_{i+1})|,
    /// plus the wrap-around pair for interior vertices.
    double xi_vertex(int v) const
    {
        if (!in_xi_domain(v))
            throw std::domain_error("xi_vertex: vertex not in V_I or V_{B,0}");
        return info_[v].xi;
    }

    /// Minimum of xi_a over non-singular vertices of V_I and V_{B,0};
    /// 1 by convention when that set is empty.
    double xi_mesh() const
    {
        double best = std::numeric_limits<double>::infinity();
        for (int v = 0; v < n_vertices(); ++v)
            if (in_xi_domain(v) && !info_[v].is_singular)
                best = std::min(best, info_[v].xi);
        return std::isfinite(best) ? best : 1.0;
    }

    std::vector<int> singular_vertices() const
    {
        std::vector<int> s;
        for (int v = 0; v < n_vertices(); ++v)
            if (info_[v].is_singular) s.push_back(v);
        return s;
    }

    struct MeshConditions {
        bool M1 = true;  // singular patches pairwise disjoint
        bool M2 = true;  // enclosed: singular Gamma0 vertices abut exactly 2 elements
        bool M3 = true;  // no singular vertices at all
    };

    MeshConditions check_mesh_conditions() const
    {
        MeshConditions c;
        const auto sing = singular_vertices();
        c.M3 = sing.empty();
        for (std::size_t i = 0; i < sing.size(); ++i)
            for (std::size_t j = i + 1; j < sing.size(); ++j) {
                const auto& fi = info_[sing[i]].fan;
                const auto& fj = info_[sing[j]].fan;
                for (int t : fi)
                    if (std::find(fj.begin(), fj.end(), t) != fj.end()) c.M1 = false;
            }
        if (mesh_->enclosed()) {
            for (int v : sing)
                if (info_[v].vclass == VertexClass::BoundaryGamma0Interior &&
                    info_[v].fan.size() != 2)
                    c.M2 = false;
        }
        return c;
    }

private:
    void classify(int v)
    {
        VertexInfo& vi = info_[v];
        const Mesh& m = *mesh_;

        // Wedge chain: triangle (a,s,t) CCW contributes wedge s -> t at a.
        std::map<int, int> start_to_tri, start_vertex_of;
        std::map<int, int> wedge_end;  // triangle -> end vertex
        for (int t : m.vertex_triangles(v)) {
            const int lv = m.local_vertex(t, v);
            const int s = m.triangle(t)[(lv + 1) % 3];
            const int e = m.triangle(t)[(lv + 2) % 3];
            start_to_tri[s] = t;
            wedge_end[t] = e;
        }

        // Boundary vertex: start at the wedge whose start edge is on the
        // boundary; interior vertex: arbitrary fixed start (smallest index).
        int start = -1;
        if (m.is_boundary_vertex(v)) {
            for (const auto& [s, t] : start_to_tri)
                if (start_to_tri.find(s) != start_to_tri.end()) {
                    bool is_start = true;
                    for (const auto& [t2, e2] : wedge_end)
                        if (e2 == s) { is_start = false; break; }
                    if (is_start) { start = s; break; }
                }
            if (start < 0) throw MeshError("boundary fan has no start edge");
        } else {
            start = start_to_tri.begin()->first;
        }

        vi.fan.clear();
        vi.angles.clear();
        int cur = start;
        const std::size_t m_count = m.vertex_triangles(v).size();
        for (std::size_t i = 0; i < m_count; ++i) {
            auto it = start_to_tri.find(cur);
            if (it == start_to_tri.end())
                throw MeshError("broken triangle fan (non-conforming patch)");
            const int t = it->second;
            vi.fan.push_back(t);
            vi.angles.push_back(m.corner_angle(t, m.local_vertex(t, v)));
            cur = wedge_end[t];
        }
        if (vi.fan.size() != m_count)
            throw MeshError("triangle fan does not cover the vertex patch");

        if (!m.is_boundary_vertex(v)) {
            vi.vclass = VertexClass::Interior;
        } else {
            // Gamma0-interior: all incident boundary edges tagged Gamma0.
            bool all_g0 = true;
            int n_bedges = 0;
            for (const auto& be : m.boundary_edges()) {
                if (be.a == v || be.b == v) {
                    ++n_bedges;
                    if (be.tag != BoundaryTag::Gamma0) all_g0 = false;
                }
            }
            vi.vclass = (all_g0 && n_bedges > 0) ? VertexClass::BoundaryGamma0Interior
                                                 : VertexClass::BoundaryOther;
        }

        const std::size_t mm = vi.angles.size();
        double xi = 0.0;
        bool singular_pairs = true;
        for (std::size_t i = 0; i + 1 < mm; ++i) {
            const double s = std::abs(std::sin(vi.angles[i] + vi.angles[i + 1]));
            xi += s;
            if (s >= kSingularSineTol) singular_pairs = false;
        }
        if (vi.vclass == VertexClass::Interior)
            xi += std::abs(std::sin(vi.angles[mm - 1] + vi.angles[0]));
        vi.xi = xi;
        vi.is_singular = (vi.vclass == VertexClass::Interior ||
                          vi.vclass == VertexClass::BoundaryGamma0Interior) &&
                         singular_pairs;
    }

    const Mesh* mesh_;
    std::vector<VertexInfo> info_;
};

} // namespace svf
