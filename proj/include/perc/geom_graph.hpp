#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "perc/kernel.hpp"
#include "perc/point_process.hpp"

namespace perc {

// Geometric graph on a marked point set: edge {i,j} iff i != j and
// |x_i - x_j| <= h(E_i, E_j) for the working (normalized) kernel, so every
// edge has length <= 1. Built through a cell list with cell side 1.
struct GeometricGraph {
    int d = 2;
    Box window;
    std::vector<double> coords;
    std::vector<double> marks;
    std::vector<std::vector<int>> adj; // sorted neighbor lists
    double cutoff = 1.0;

    int size() const { return static_cast<int>(adj.size()); }
    const double* point(int i) const { return coords.data() + static_cast<std::size_t>(i) * d; }
    bool has_edge(int i, int j) const;
    std::size_t edge_count() const;
};

GeometricGraph build_graph(const MarkedPointSet& points, const KernelSpec& kernel);

// Graph assembled from explicit vertices and an edge predicate evaluated on
// all candidate pairs within the cutoff; shared by the lattice module.
template <class EdgePred>
GeometricGraph build_graph_custom(const MarkedPointSet& points, double cutoff, EdgePred pred);

// union-find component labels, -1 for an empty graph's nonexistent vertices
std::vector<int> connected_components(const GeometricGraph& g, int* component_count = nullptr);

// true iff one component touches (within distance 1 of) both opposite faces
// of the window along `axis`
bool spans_window(const GeometricGraph& g, int axis);

// edge list text dump `i j` preceded by a vertex table
void dump_graph(std::ostream& os, const GeometricGraph& g);

namespace detail {

// flat hash over integer cell coordinates, open addressing
struct CellIndex {
    int d;
    double side;
    std::vector<std::vector<int>> buckets;
    std::vector<std::vector<long long>> keys;
    std::size_t mask;

    CellIndex(int d_, double side_, std::size_t n) : d(d_), side(side_) {
        std::size_t cap = 16;
        while (cap < 2 * n + 16) cap <<= 1;
        mask = cap - 1;
        buckets.assign(cap, {});
        keys.assign(cap, {});
    }

    static std::size_t cell_key(const long long* c, int d) {
        std::size_t h = 0xcbf29ce484222325ull;
        for (int i = 0; i < d; ++i) {
            h ^= static_cast<std::size_t>(c[i]);
            h *= 0x100000001b3ull;
            h ^= h >> 29;
        }
        return h;
    }

    std::size_t slot(const long long* c) const {
        std::size_t s = cell_key(c, d) & mask;
        for (;;) {
            if (keys[s].empty()) return s;
            if (std::equal(keys[s].begin(), keys[s].end(), c)) return s;
            s = (s + 1) & mask;
        }
    }

    void insert(const double* x, int idx) {
        long long c[8];
        for (int i = 0; i < d; ++i) c[i] = static_cast<long long>(std::floor(x[i] / side));
        std::size_t s = slot(c);
        if (keys[s].empty()) keys[s].assign(c, c + d);
        buckets[s].push_back(idx);
    }

    template <class Fn>
    void for_neighbors(const double* x, Fn&& fn) const {
        long long base[8], c[8];
        for (int i = 0; i < d; ++i) base[i] = static_cast<long long>(std::floor(x[i] / side));
        int offs[8];
        for (int i = 0; i < d; ++i) offs[i] = -1;
        for (;;) { // the 3^d surrounding cells
            for (int i = 0; i < d; ++i) c[i] = base[i] + offs[i];
            std::size_t s = slot(c);
            if (!keys[s].empty())
                for (int j : buckets[s]) fn(j);
            int i = 0;
            while (i < d && offs[i] == 1) offs[i++] = -1;
            if (i == d) break;
            ++offs[i];
        }
    }
};

} // namespace detail

template <class EdgePred>
GeometricGraph build_graph_custom(const MarkedPointSet& points, double cutoff, EdgePred pred) {
    GeometricGraph g;
    g.d = points.d;
    g.window = points.window;
    g.coords = points.coords;
    g.marks = points.marks;
    g.cutoff = cutoff;
    const int n = static_cast<int>(points.size());
    g.adj.assign(n, {});

    detail::CellIndex cells(g.d, cutoff, static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cells.insert(g.point(i), i);
    for (int i = 0; i < n; ++i) {
        cells.for_neighbors(g.point(i), [&](int j) {
            if (j <= i) return;
            if (pred(i, j)) {
                g.adj[i].push_back(j);
                g.adj[j].push_back(i);
            }
        });
    }
    for (auto& a : g.adj) std::sort(a.begin(), a.end());
    return g;
}

} // namespace perc
