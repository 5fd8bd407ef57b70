#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "perc/geom_graph.hpp"
#include "perc/kernel.hpp"
#include "perc/point_process.hpp"
#include "perc/rng.hpp"

namespace perc {

constexpr int kMaxLatticeDim = 4;

// Lattice site as integer multiples of eps; unused trailing coordinates stay
// zero so comparison and hashing are dimension-agnostic. Ordering is
// lexicographic, which the renormalization tie-breaks rely on.
struct Site {
    std::array<long long, kMaxLatticeDim> c{0, 0, 0, 0};

    friend bool operator==(const Site&, const Site&) = default;
    friend auto operator<=>(const Site&, const Site&) = default;
    long long& operator[](int i) { return c[i]; }
    long long operator[](int i) const { return c[i]; }
};

struct SiteHash {
    std::size_t operator()(const Site& s) const {
        std::size_t h = 0xcbf29ce484222325ull;
        for (long long v : s.c) {
            h ^= static_cast<std::size_t>(v);
            h *= 0x100000001b3ull;
            h ^= h >> 29;
        }
        return h;
    }
};

using SiteMap = std::unordered_map<Site, double, SiteHash>;

struct IBox {
    int d = 2;
    Site lo, hi; // inclusive site bounds
    bool contains(const Site& s) const {
        for (int i = 0; i < d; ++i)
            if (s[i] < lo[i] || s[i] > hi[i]) return false;
        return true;
    }
    double site_count() const {
        double n = 1.0;
        for (int i = 0; i < d; ++i) n *= static_cast<double>(hi[i] - lo[i] + 1);
        return n;
    }
    static IBox centered(int d, long long radius);
};

// Discretization constants: alpha = sqrt(d)/q with eps*sqrt(d) = alpha/100,
// i.e. eps = 1/(100q). Demo runs may use a coarser grid (custom kappa =
// 1/eps); the couplings that stay exact on a coarser grid assert the
// inequalities they actually need.
struct RenormParams {
    int d = 2;
    long long q = 0;      // alpha = sqrt(d)/q when q > 0
    double alpha = 0.0;
    long long kappa = 1;  // 1/eps, always a positive integer
    int K = 16;
    double lambda = 0.0;
    double lambda_star = 0.0;
    double ell_star = 0.0;
    Direction direction = Direction::Increasing;
    Interval u_star; // U*(alpha/2) of the working kernel

    double eps() const { return 1.0 / static_cast<double>(kappa); }
    double rho_base() const { return lambda_star * std::pow(eps(), d); }
    double rho_layer() const { return (lambda - lambda_star) * std::pow(eps(), d) / K; }
    bool coupling_exact() const { return 2.0 * std::sqrt(static_cast<double>(d)) * eps() <= alpha; }
};

// Faithful parameter derivation: the largest alpha = sqrt(d)/q with
// 10*alpha <= min(ell_star, 1), eps = 1/(100q).
RenormParams derive_params(const KernelSpec& kernel, const MarkDistribution& dist,
                           double lambda, double lambda_star, double ell_star, int K, int d);

// Coarse-grid parameters for desk-scale renormalization demos. alpha and
// kappa are free apart from sanity requirements (alpha < 1/10 and
// eps <= 1 - 4 alpha, which seed connectivity needs).
RenormParams make_demo_params(const KernelSpec& kernel, const MarkDistribution& dist,
                              double lambda, double lambda_star, double alpha,
                              long long kappa, int K, int d);

// A value of the cell law L(rho, nu): a finite mark or the empty-cell
// sentinel, which stands for +inf when h is decreasing and -inf when
// increasing. Kernel evaluation only ever sees finite values.
struct FieldValue {
    bool finite = false;
    double value = 0.0;
    static FieldValue of(double v) { return {true, v}; }
    static FieldValue empty() { return {}; }
};

FieldValue sample_L_law(double rho, const MarkDistribution& dist, Direction dir, RngStream& rng);
// conditioned on the cell being nonempty
double sample_L_law_finite(double rho, const MarkDistribution& dist, Direction dir, RngStream& rng);

// Cell fields on a finite window of eps Z^d, stored sparsely: a site absent
// from a map carries the sentinel. a_au obeys the augmented-field identity
// at every site.
struct LatticeField {
    RenormParams params;
    IBox window;
    SiteMap a;
    std::vector<SiteMap> t;
    SiteMap a_au;

    FieldValue a_at(const Site& s) const;
    FieldValue t_at(int j, const Site& s) const;
    FieldValue au_at(const Site& s) const;
    void rebuild_augmented();
};

LatticeField build_fields(const RenormParams& params, const IBox& window,
                          const MarkDistribution& dist, RngStream& rng);

// Coupled variant: per-cell inf/sup of the layered point marks (the B
// fields). Distributionally equal to build_fields output.
LatticeField fields_from_points(const LayeredPointSet& layers, const RenormParams& params,
                                const IBox& window);

enum class LatticeGraphKind { GMinus, GMid, GPlus };

struct LatticeGraph {
    LatticeGraphKind which = LatticeGraphKind::GPlus;
    std::vector<Site> sites; // sorted; vertex i of graph is sites[i]
    GeometricGraph graph;    // coordinates are site * eps, marks the field values
};

LatticeGraph build_lattice_graph(const LatticeField& field, LatticeGraphKind which,
                                 const KernelSpec& kernel);

// seed test: every site of B(z,m) carries a (finite) A-value in U*
bool is_seed(const LatticeField& field, const Site& z, int m);
// force A in U* on B(z,m) (exact conditioning: the event is a product over
// those sites); refreshes the augmented field there
void plant_seed(LatticeField& field, const Site& z, int m, const MarkDistribution& dist,
                RngStream& rng);

struct CoupledCrossingCheck {
    int r_continuum = 0; // R_{L+1} of the continuum graph
    int r_lattice = 0;   // R_L of the coupled lattice G+
    bool inequality = false;
};

CoupledCrossingCheck coupled_crossing_check(const LayeredPointSet& layers,
                                            const RenormParams& params,
                                            const KernelSpec& kernel, double L);

// text dump `z1 ... zd A T1 ... TK Aau`, sentinels spelled inf/-inf
void dump_field(std::ostream& os, const LatticeField& field);

} // namespace perc
