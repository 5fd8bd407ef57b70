#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "perc/kernel.hpp"
#include "perc/rng.hpp"

namespace perc {

// Axis-aligned box in R^d.
struct Box {
    std::vector<double> lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    bool contains(const double* x) const;
    static Box cube(int d, double lo, double hi);
    Box expanded(double margin) const;
};

// Realization of a marked point process on a window: flat coordinate array
// (point i occupies coords[i*d .. i*d+d-1]) plus one mark per point.
struct MarkedPointSet {
    int d = 2;
    Box window;
    std::vector<double> coords;
    std::vector<double> marks;
    double intensity = 0.0;
    std::uint64_t stream_id = 0;

    std::size_t size() const { return marks.empty() ? coords.size() / d : marks.size(); }
    const double* point(std::size_t i) const { return coords.data() + i * d; }
};

// Intensity split into a base layer (lambda_*) plus K sprinkling layers
// ((lambda - lambda_*)/K each); the union is a sample at lambda.
struct LayeredPointSet {
    MarkedPointSet base;
    std::vector<MarkedPointSet> layers;
    MarkedPointSet merged() const;
};

MarkedPointSet sample_ppp(double intensity, const Box& window, int d, RngStream& rng);
void attach_marks(MarkedPointSet& points, const MarkDistribution& dist, RngStream& rng);
MarkedPointSet sample_marked_ppp(double intensity, const Box& window, int d,
                                 const MarkDistribution& dist, RngStream& rng);

LayeredPointSet split_layers(double lambda, double lambda_star, int layer_count,
                             const Box& window, int d, const MarkDistribution& dist,
                             RngStream& rng);

// debug text format: one point per line, `x1 ... xd mark`
void dump_points(std::ostream& os, const MarkedPointSet& pts);

} // namespace perc
