#include "perc/geom_graph.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace perc {

bool GeometricGraph::has_edge(int i, int j) const {
    const auto& a = adj[i];
    return std::binary_search(a.begin(), a.end(), j);
}

std::size_t GeometricGraph::edge_count() const {
    std::size_t m = 0;
    for (const auto& a : adj) m += a.size();
    return m / 2;
}

GeometricGraph build_graph(const MarkedPointSet& points, const KernelSpec& kernel) {
    if (!kernel.is_normalized())
        throw std::invalid_argument("build_graph expects the normalized kernel (sup h = 1)");
    if (points.marks.size() * points.d != points.coords.size())
        throw std::invalid_argument("point set has missing marks");
    const int d = points.d;
    const double* coords = points.coords.data();
    const double* marks = points.marks.data();
    return build_graph_custom(points, 1.0, [&](int i, int j) {
        const double h = kernel.eval_norm(marks[i], marks[j]);
        if (h < 0.0) return false;
        double dist2 = 0.0;
        const double* a = coords + static_cast<std::size_t>(i) * d;
        const double* b = coords + static_cast<std::size_t>(j) * d;
        for (int k = 0; k < d; ++k) dist2 += (a[k] - b[k]) * (a[k] - b[k]);
        return dist2 <= h * h; // ties count as edges
    });
}

namespace {

struct UnionFind {
    std::vector<int> parent, rank_;
    explicit UnionFind(int n) : parent(n), rank_(n, 0) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }
};

} // namespace

std::vector<int> connected_components(const GeometricGraph& g, int* component_count) {
    const int n = g.size();
    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j : g.adj[i])
            if (j > i) uf.unite(i, j);
    std::vector<int> label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        int r = uf.find(i);
        if (label[r] == -1) label[r] = next++;
        label[i] = label[r];
    }
    if (component_count) *component_count = next;
    return label;
}

bool spans_window(const GeometricGraph& g, int axis) {
    if (g.size() == 0) return false;
    if (axis < 0 || axis >= g.d) throw std::invalid_argument("bad axis");
    int ncomp = 0;
    std::vector<int> label = connected_components(g, &ncomp);
    std::vector<char> lo_touch(ncomp, 0), hi_touch(ncomp, 0);
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i)[axis];
        if (x - g.window.lo[axis] <= 1.0) lo_touch[label[i]] = 1;
        if (g.window.hi[axis] - x <= 1.0) hi_touch[label[i]] = 1;
    }
    for (int c = 0; c < ncomp; ++c)
        if (lo_touch[c] && hi_touch[c]) return true;
    return false;
}

void dump_graph(std::ostream& os, const GeometricGraph& g) {
    os << "# vertices " << g.size() << '\n';
    for (int i = 0; i < g.size(); ++i) {
        os << i;
        for (int k = 0; k < g.d; ++k) os << ' ' << g.point(i)[k];
        os << ' ' << (i < static_cast<int>(g.marks.size()) ? g.marks[i] : 0.0) << '\n';
    }
    os << "# edges " << g.edge_count() << '\n';
    for (int i = 0; i < g.size(); ++i)
        for (int j : g.adj[i])
            if (j > i) os << i << ' ' << j << '\n';
}

} // namespace perc
