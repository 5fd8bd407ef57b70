#include "perc/point_process.hpp"

#include <ostream>
#include <stdexcept>

namespace perc {

double Box::volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
}

bool Box::contains(const double* x) const {
    for (int i = 0; i < dim(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

Box Box::cube(int d, double lo, double hi) {
    Box b;
    b.lo.assign(d, lo);
    b.hi.assign(d, hi);
    return b;
}

Box Box::expanded(double margin) const {
    Box b = *this;
    for (int i = 0; i < dim(); ++i) {
        b.lo[i] -= margin;
        b.hi[i] += margin;
    }
    return b;
}

MarkedPointSet sample_ppp(double intensity, const Box& window, int d, RngStream& rng) {
    if (intensity < 0.0) throw std::invalid_argument("intensity must be >= 0");
    if (window.dim() != d || window.volume() <= 0.0)
        throw std::invalid_argument("window must be a non-degenerate box of dimension d");
    MarkedPointSet out;
    out.d = d;
    out.window = window;
    out.intensity = intensity;
    const std::uint64_t n = rng.poisson(intensity * window.volume());
    out.coords.reserve(n * d);
    for (std::uint64_t i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k)
            out.coords.push_back(rng.uniform(window.lo[k], window.hi[k]));
    return out;
}

void attach_marks(MarkedPointSet& points, const MarkDistribution& dist, RngStream& rng) {
    const std::size_t n = points.coords.size() / points.d;
    points.marks.resize(n);
    for (std::size_t i = 0; i < n; ++i) points.marks[i] = dist.sample(rng);
}

MarkedPointSet sample_marked_ppp(double intensity, const Box& window, int d,
                                 const MarkDistribution& dist, RngStream& rng) {
    MarkedPointSet pts = sample_ppp(intensity, window, d, rng);
    attach_marks(pts, dist, rng);
    return pts;
}

LayeredPointSet split_layers(double lambda, double lambda_star, int layer_count,
                             const Box& window, int d, const MarkDistribution& dist,
                             RngStream& rng) {
    if (!(lambda_star > 0.0) || !(lambda_star < lambda))
        throw std::invalid_argument("layer split needs 0 < lambda_* < lambda");
    if (layer_count < 1) throw std::invalid_argument("layer split needs K >= 1");
    LayeredPointSet out;
    out.base = sample_marked_ppp(lambda_star, window, d, dist, rng);
    const double per_layer = (lambda - lambda_star) / layer_count;
    out.layers.reserve(layer_count);
    for (int j = 0; j < layer_count; ++j)
        out.layers.push_back(sample_marked_ppp(per_layer, window, d, dist, rng));
    return out;
}

MarkedPointSet LayeredPointSet::merged() const {
    MarkedPointSet all = base;
    for (const auto& l : layers) {
        all.coords.insert(all.coords.end(), l.coords.begin(), l.coords.end());
        all.marks.insert(all.marks.end(), l.marks.begin(), l.marks.end());
        all.intensity += l.intensity;
    }
    return all;
}

void dump_points(std::ostream& os, const MarkedPointSet& pts) {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = pts.point(i);
        for (int k = 0; k < pts.d; ++k) os << x[k] << ' ';
        os << (i < pts.marks.size() ? pts.marks[i] : 0.0) << '\n';
    }
}

} // namespace perc
