#pragma once

// Test-only brute-force oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "perc/crossings.hpp"
#include "perc/geom_graph.hpp"

namespace testoracles {

// quadratic all-pairs edge rule
inline std::vector<std::vector<int>> brute_adjacency(const perc::MarkedPointSet& pts,
                                                     const perc::KernelSpec& k) {
    const int n = static_cast<int>(pts.size());
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < pts.d; ++c) {
                const double dx = pts.point(i)[c] - pts.point(j)[c];
                d2 += dx * dx;
            }
            const double h = k.eval_norm(pts.marks[i], pts.marks[j]);
            if (h >= 0.0 && d2 <= h * h) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    return adj;
}

// exhaustive vertex-disjoint path packing (source, interiors, sink), for
// instances with at most ~20 eligible vertices
inline void enumerate_paths(const std::vector<std::vector<int>>& adj,
                            const std::vector<perc::RegionTag>& tags, int u, std::uint32_t mask,
                            std::vector<std::uint32_t>& out) {
    if (tags[u] == perc::RegionTag::Sink) {
        out.push_back(mask);
        return;
    }
    for (int v : adj[u]) {
        if (mask & (1u << v)) continue;
        if (tags[v] == perc::RegionTag::Outside || tags[v] == perc::RegionTag::Source) continue;
        enumerate_paths(adj, tags, v, mask | (1u << v), out);
    }
}

inline int best_packing(const std::vector<std::uint32_t>& paths, std::uint32_t used,
                        std::size_t from) {
    int best = 0;
    for (std::size_t i = from; i < paths.size(); ++i)
        if (!(paths[i] & used))
            best = std::max(best, 1 + best_packing(paths, used | paths[i], i + 1));
    return best;
}

inline int packing_oracle(const std::vector<std::vector<int>>& adj,
                          const std::vector<perc::RegionTag>& tags) {
    std::vector<std::uint32_t> paths;
    for (std::size_t s = 0; s < adj.size(); ++s)
        if (tags[s] == perc::RegionTag::Source)
            enumerate_paths(adj, tags, static_cast<int>(s), 1u << s, paths);
    std::sort(paths.begin(), paths.end());
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    return best_packing(paths, 0, 0);
}

} // namespace testoracles
