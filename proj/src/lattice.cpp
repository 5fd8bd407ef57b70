#include "perc/lattice.hpp"

#include "perc/crossings.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace perc {

IBox IBox::centered(int d, long long radius) {
    IBox b;
    b.d = d;
    for (int i = 0; i < d; ++i) {
        b.lo[i] = -radius;
        b.hi[i] = radius;
    }
    return b;
}

RenormParams derive_params(const KernelSpec& kernel, const MarkDistribution& dist,
                           double lambda, double lambda_star, double ell_star, int K, int d) {
    // pure arithmetic, so any d >= 2 is fine; site machinery checks its own cap
    if (d < 2) throw std::invalid_argument("dimension must be >= 2");
    if (!(ell_star > 0.0)) throw std::invalid_argument("ell_star must be > 0");
    if (!(lambda_star > 0.0) || !(lambda_star < lambda))
        throw std::invalid_argument("needs 0 < lambda_* < lambda");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    const double sqd = std::sqrt(static_cast<double>(d));
    const double cap = std::min(1.0, ell_star);
    // smallest q with 10 sqrt(d)/q <= cap, i.e. the largest admissible alpha
    const long long q = static_cast<long long>(std::ceil(10.0 * sqd / cap - 1e-12));
    RenormParams p;
    p.d = d;
    p.q = q;
    p.alpha = sqd / static_cast<double>(q);
    p.kappa = 100 * q; // eps = alpha/(100 sqrt(d)) = 1/(100q)
    p.K = K;
    p.lambda = lambda;
    p.lambda_star = lambda_star;
    p.ell_star = ell_star;
    p.direction = kernel.direction();
    p.u_star = kernel.u_star_checked(p.alpha / 2.0, dist);
    return p;
}

RenormParams make_demo_params(const KernelSpec& kernel, const MarkDistribution& dist,
                              double lambda, double lambda_star, double alpha,
                              long long kappa, int K, int d) {
    if (d < 2 || d > kMaxLatticeDim) throw std::invalid_argument("dimension must be in [2,4]");
    if (!(alpha > 0.0) || alpha >= 0.1) throw std::invalid_argument("demo alpha must be in (0, 0.1)");
    if (kappa < 1) throw std::invalid_argument("kappa must be >= 1");
    if (1.0 / kappa > 1.0 - 4.0 * alpha)
        throw std::invalid_argument("grid too coarse: eps <= 1 - 4 alpha is needed for seed connectivity");
    if (!(lambda_star > 0.0) || !(lambda_star < lambda))
        throw std::invalid_argument("needs 0 < lambda_* < lambda");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    RenormParams p;
    p.d = d;
    p.q = 0;
    p.alpha = alpha;
    p.kappa = kappa;
    p.K = K;
    p.lambda = lambda;
    p.lambda_star = lambda_star;
    p.ell_star = 10.0 * alpha;
    p.direction = kernel.direction();
    p.u_star = kernel.u_star_checked(alpha / 2.0, dist);
    return p;
}

FieldValue sample_L_law(double rho, const MarkDistribution& dist, Direction dir, RngStream& rng) {
    if (rho < 0.0) throw std::invalid_argument("rho must be >= 0");
    const std::uint64_t n = rng.poisson(rho);
    if (n == 0) return FieldValue::empty();
    double best = dist.sample(rng);
    for (std::uint64_t i = 1; i < n; ++i) {
        double v = dist.sample(rng);
        best = dir == Direction::Decreasing ? std::min(best, v) : std::max(best, v);
    }
    return FieldValue::of(best);
}

double sample_L_law_finite(double rho, const MarkDistribution& dist, Direction dir, RngStream& rng) {
    if (!(rho > 0.0)) throw std::invalid_argument("conditioned cell law needs rho > 0");
    // N ~ Poisson(rho) conditioned on N >= 1, by sequential inversion
    const double denom = -std::expm1(-rho); // 1 - e^-rho
    double u = rng.uniform01() * denom;
    double term = std::exp(-rho) * rho; // P(N=1)
    std::uint64_t n = 1;
    double acc = term;
    while (u > acc && n < 100000) {
        ++n;
        term *= rho / static_cast<double>(n);
        acc += term;
    }
    double best = dist.sample(rng);
    for (std::uint64_t i = 1; i < n; ++i) {
        double v = dist.sample(rng);
        best = dir == Direction::Decreasing ? std::min(best, v) : std::max(best, v);
    }
    return best;
}

FieldValue LatticeField::a_at(const Site& s) const {
    auto it = a.find(s);
    return it == a.end() ? FieldValue::empty() : FieldValue::of(it->second);
}

FieldValue LatticeField::t_at(int j, const Site& s) const {
    auto it = t[j].find(s);
    return it == t[j].end() ? FieldValue::empty() : FieldValue::of(it->second);
}

FieldValue LatticeField::au_at(const Site& s) const {
    auto it = a_au.find(s);
    return it == a_au.end() ? FieldValue::empty() : FieldValue::of(it->second);
}

void LatticeField::rebuild_augmented() {
    a_au = a;
    const bool dec = params.direction == Direction::Decreasing;
    for (const auto& layer : t)
        for (const auto& [s, v] : layer) {
            auto [it, fresh] = a_au.try_emplace(s, v);
            if (!fresh) it->second = dec ? std::min(it->second, v) : std::max(it->second, v);
        }
}

namespace {

// decode a linear site index of `window` in mixed radix
Site decode_site(const IBox& w, std::uint64_t idx) {
    Site s;
    for (int i = 0; i < w.d; ++i) {
        const std::uint64_t extent = static_cast<std::uint64_t>(w.hi[i] - w.lo[i] + 1);
        s[i] = w.lo[i] + static_cast<long long>(idx % extent);
        idx /= extent;
    }
    return s;
}

// The nonempty cells of an i.i.d. L(rho, nu) layer form a Bernoulli
// (1 - e^-rho) site process; enumerate them by geometric skips so cost is
// proportional to the number of nonempty cells, not the window volume.
void sample_layer(SiteMap& out, const IBox& window, double rho, const MarkDistribution& dist,
                  Direction dir, RngStream& rng) {
    out.clear();
    if (!(rho > 0.0)) return;
    const double count = window.site_count();
    if (count > 9e18) throw std::invalid_argument("lattice window too large");
    const std::uint64_t n_sites = static_cast<std::uint64_t>(count);
    const double expected = count * -std::expm1(-rho);
    if (expected > 5e7) throw std::invalid_argument("lattice window too dense to sample");
    std::uint64_t idx = 0;
    bool first = true;
    for (;;) {
        // skip ~ Geometric(p) with p = 1 - e^-rho; log(1-p) = -rho exactly
        const double u = rng.uniform01_pos();
        const double skip = std::floor(std::log(u) / -rho);
        if (skip > 9.5e18) break;
        idx += static_cast<std::uint64_t>(skip) + (first ? 0 : 1);
        first = false;
        if (idx >= n_sites) break;
        out[decode_site(window, idx)] = sample_L_law_finite(rho, dist, dir, rng);
    }
}

} // namespace

LatticeField build_fields(const RenormParams& params, const IBox& window,
                          const MarkDistribution& dist, RngStream& rng) {
    if (params.K < 1) throw std::invalid_argument("K must be >= 1");
    if (window.d != params.d) throw std::invalid_argument("window dimension mismatch");
    LatticeField f;
    f.params = params;
    f.window = window;
    sample_layer(f.a, window, params.rho_base(), dist, params.direction, rng);
    f.t.resize(params.K);
    for (int j = 0; j < params.K; ++j)
        sample_layer(f.t[j], window, params.rho_layer(), dist, params.direction, rng);
    f.rebuild_augmented();
    return f;
}

namespace {

void accumulate_cells(SiteMap& out, const MarkedPointSet& pts, const IBox& window,
                      long long kappa, Direction dir) {
    const bool dec = dir == Direction::Decreasing;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = pts.point(i);
        Site s;
        for (int k = 0; k < pts.d; ++k)
            s[k] = static_cast<long long>(std::floor(x[k] * static_cast<double>(kappa)));
        if (!window.contains(s)) continue;
        const double v = pts.marks[i];
        auto [it, fresh] = out.try_emplace(s, v);
        if (!fresh) it->second = dec ? std::min(it->second, v) : std::max(it->second, v);
    }
}

} // namespace

LatticeField fields_from_points(const LayeredPointSet& layers, const RenormParams& params,
                                const IBox& window) {
    LatticeField f;
    f.params = params;
    f.window = window;
    accumulate_cells(f.a, layers.base, window, params.kappa, params.direction);
    f.t.resize(layers.layers.size());
    for (std::size_t j = 0; j < layers.layers.size(); ++j)
        accumulate_cells(f.t[j], layers.layers[j], window, params.kappa, params.direction);
    f.rebuild_augmented();
    return f;
}

LatticeGraph build_lattice_graph(const LatticeField& field, LatticeGraphKind which,
                                 const KernelSpec& kernel) {
    if (!kernel.is_normalized())
        throw std::invalid_argument("lattice graphs expect the normalized kernel");
    const RenormParams& p = field.params;
    const SiteMap& src = which == LatticeGraphKind::GPlus ? field.a_au : field.a;
    LatticeGraph out;
    out.which = which;
    out.sites.reserve(src.size());
    for (const auto& [s, v] : src) out.sites.push_back(s);
    std::sort(out.sites.begin(), out.sites.end());

    MarkedPointSet pts;
    pts.d = p.d;
    pts.window.lo.resize(p.d);
    pts.window.hi.resize(p.d);
    const double eps = p.eps();
    for (int i = 0; i < p.d; ++i) {
        pts.window.lo[i] = static_cast<double>(field.window.lo[i]) * eps;
        pts.window.hi[i] = static_cast<double>(field.window.hi[i]) * eps;
    }
    pts.coords.reserve(out.sites.size() * p.d);
    pts.marks.reserve(out.sites.size());
    for (const Site& s : out.sites) {
        for (int i = 0; i < p.d; ++i) pts.coords.push_back(static_cast<double>(s[i]) * eps);
        pts.marks.push_back(src.at(s));
    }

    const double slack = which == LatticeGraphKind::GMinus  ? 3.0 * p.alpha
                         : which == LatticeGraphKind::GMid ? 2.0 * p.alpha
                                                           : p.alpha;
    const double* coords = pts.coords.data();
    const double* marks = pts.marks.data();
    const int d = p.d;
    out.graph = build_graph_custom(pts, 1.0, [&](int i, int j) {
        const double h = kernel.eval_norm(marks[i], marks[j]) - slack;
        if (h < 0.0) return false;
        double dist2 = 0.0;
        const double* a = coords + static_cast<std::size_t>(i) * d;
        const double* b = coords + static_cast<std::size_t>(j) * d;
        for (int k = 0; k < d; ++k) dist2 += (a[k] - b[k]) * (a[k] - b[k]);
        return dist2 <= h * h;
    });
    return out;
}

bool is_seed(const LatticeField& field, const Site& z, int m) {
    const RenormParams& p = field.params;
    const long long r = static_cast<long long>(m) * p.kappa;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = z[i] - r;
        hi[i] = z[i] + r;
        if (lo[i] < field.window.lo[i] || hi[i] > field.window.hi[i])
            throw std::out_of_range("seed box exceeds the field window");
    }
    Site s = lo;
    for (;;) {
        auto it = field.a.find(s);
        if (it == field.a.end() || !p.u_star.contains(it->second)) return false;
        int i = 0;
        while (i < p.d && s[i] == hi[i]) {
            s[i] = lo[i];
            ++i;
        }
        if (i == p.d) break;
        ++s[i];
    }
    return true;
}

void plant_seed(LatticeField& field, const Site& z, int m, const MarkDistribution& dist,
                RngStream& rng) {
    const RenormParams& p = field.params;
    if (dist.mass(p.u_star.lo, p.u_star.hi) <= 0.0)
        throw std::invalid_argument("cannot plant a seed: U* carries no mark mass");
    const long long r = static_cast<long long>(m) * p.kappa;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = z[i] - r;
        hi[i] = z[i] + r;
        if (lo[i] < field.window.lo[i] || hi[i] > field.window.hi[i])
            throw std::out_of_range("seed box exceeds the field window");
    }
    const bool dec = p.direction == Direction::Decreasing;
    Site s = lo;
    for (;;) {
        // draw A | A in U*: rejection on the conditioned-nonempty cell law
        double v;
        int guard = 0;
        do {
            v = sample_L_law_finite(p.rho_base(), dist, p.direction, rng);
            if (++guard > 1000000) throw std::runtime_error("seed planting rejection stalled");
        } while (!p.u_star.contains(v));
        field.a[s] = v;
        auto [it, fresh] = field.a_au.try_emplace(s, v);
        if (!fresh) it->second = dec ? std::min(it->second, v) : std::max(it->second, v);
        int i = 0;
        while (i < p.d && s[i] == hi[i]) {
            s[i] = lo[i];
            ++i;
        }
        if (i == p.d) break;
        ++s[i];
    }
    // planting can only have moved a_au toward the field direction on the
    // seed sites; recompute them exactly
    Site s2 = lo;
    for (;;) {
        double v = field.a.at(s2);
        for (const auto& layer : field.t) {
            auto it = layer.find(s2);
            if (it != layer.end()) v = dec ? std::min(v, it->second) : std::max(v, it->second);
        }
        field.a_au[s2] = v;
        int i = 0;
        while (i < p.d && s2[i] == hi[i]) {
            s2[i] = lo[i];
            ++i;
        }
        if (i == p.d) break;
        ++s2[i];
    }
}

CoupledCrossingCheck coupled_crossing_check(const LayeredPointSet& layers,
                                            const RenormParams& params,
                                            const KernelSpec& kernel, double L) {
    if (!params.coupling_exact())
        throw std::invalid_argument("coupled crossing check needs 2 sqrt(d) eps <= alpha");
    const int d = params.d;

    MarkedPointSet all = layers.merged();
    GeometricGraph cont = build_graph(all, kernel);
    CrossingResult rc = max_disjoint_crossings(cont, CrossingSpec::continuum(d, L + 1.0));

    // lattice window: Delta_L plus margin 1, in site units
    IBox w;
    w.d = d;
    for (int i = 0; i < d; ++i) {
        const double lo = i == 0 ? -L - 3.0 : -L - 1.0;
        const double hi = i == 0 ? L + 3.0 : L + 1.0;
        w.lo[i] = static_cast<long long>(std::floor(lo * static_cast<double>(params.kappa)));
        w.hi[i] = static_cast<long long>(std::ceil(hi * static_cast<double>(params.kappa)));
    }
    LatticeField field = fields_from_points(layers, params, w);
    LatticeGraph gplus = build_lattice_graph(field, LatticeGraphKind::GPlus, kernel);
    CrossingResult rl = max_disjoint_crossings(gplus.graph, CrossingSpec::lattice(d, L));

    CoupledCrossingCheck out;
    out.r_continuum = rc.count;
    out.r_lattice = rl.count;
    out.inequality = rc.count >= rl.count;
    return out;
}

void dump_field(std::ostream& os, const LatticeField& field) {
    const RenormParams& p = field.params;
    if (field.window.site_count() > 2e6)
        throw std::invalid_argument("field window too large to dump");
    const char* empty_sym = p.direction == Direction::Decreasing ? "inf" : "-inf";
    Site s = field.window.lo;
    const double eps = p.eps();
    for (;;) {
        for (int i = 0; i < p.d; ++i) os << static_cast<double>(s[i]) * eps << ' ';
        auto write = [&](FieldValue v) {
            if (v.finite)
                os << v.value;
            else
                os << empty_sym;
        };
        write(field.a_at(s));
        for (std::size_t j = 0; j < field.t.size(); ++j) {
            os << ' ';
            write(field.t_at(static_cast<int>(j), s));
        }
        os << ' ';
        write(field.au_at(s));
        os << '\n';
        int i = 0;
        while (i < p.d && s[i] == field.window.hi[i]) {
            s[i] = field.window.lo[i];
            ++i;
        }
        if (i == p.d) break;
        ++s[i];
    }
}

} // namespace perc
