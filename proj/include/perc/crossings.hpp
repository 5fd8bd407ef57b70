#pragma once

#include <vector>

#include "perc/geom_graph.hpp"

namespace perc {

enum class RegionTag { Source, Interior, Sink, Outside };

// Which LR-crossing geometry to count:
//   Continuum(L): box [-L,L]^d, entry/exit strips beyond +-L in x1
//   Lattice(L):   box [-L-2,L+2] x [-L,L]^{d-1}
//   Slice(L,k):   lattice box intersected with [-k,k)^{d-2} in the trailing
//                 coordinates (half-open), entry/exit confined to the slice
struct CrossingSpec {
    enum class Variant { Continuum, Lattice, Slice };
    Variant variant = Variant::Continuum;
    int d = 2;
    double L = 1.0;
    double k = 0.0; // slice half-thickness

    static CrossingSpec continuum(int d, double L) { return {Variant::Continuum, d, L, 0.0}; }
    static CrossingSpec lattice(int d, double L) { return {Variant::Lattice, d, L, 0.0}; }
    static CrossingSpec slice(int d, double L, double k) { return {Variant::Slice, d, L, k}; }

    RegionTag classify(const double* x) const;
};

struct CrossingResult {
    int count = 0;
    int min_cut_size = 0;
    std::vector<std::vector<int>> witnesses; // vertex index sequences
};

std::vector<RegionTag> classify_vertices(const GeometricGraph& g, const CrossingSpec& spec);

// Maximal family of vertex-disjoint source-to-sink paths on an arbitrary
// adjacency structure. Witness interiors are Interior-tagged; endpoints are
// Source/Sink-tagged and not shared between witnesses either.
CrossingResult max_disjoint_paths(const std::vector<std::vector<int>>& adj,
                                  const std::vector<RegionTag>& tags);

CrossingResult max_disjoint_crossings(const GeometricGraph& g, const CrossingSpec& spec);

// count >= c L^{d-1} (continuum/lattice) or count >= c L (slice)
bool crossing_scaling_statistic(const CrossingResult& r, const CrossingSpec& spec, double c);

// throws on any malformed witness family; used by tests and debug checks
void verify_witnesses(const CrossingResult& r, const std::vector<std::vector<int>>& adj,
                      const std::vector<RegionTag>& tags);

} // namespace perc
