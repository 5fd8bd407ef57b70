#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "perc/lattice.hpp"

namespace perc {

// Site sets are sorted unique vectors; membership is binary search.
using SiteSet = std::vector<Site>;

bool set_contains(const SiteSet& set, const Site& s);
SiteSet set_union(const SiteSet& a, const SiteSet& b);
bool sets_intersect(const SiteSet& a, const SiteSet& b);

// ---- region geometry, all in site units (site * eps = position) ----------

// T(n): n-1 < |x|_inf <= n with 0 <= x_i <= x_1
SiteSet t_region(int n, const RenormParams& p);
// T(m,n): [n+eps, n+eps+2m] x [0,n]^{d-1}
SiteSet t_region_mn(int m, int n, const RenormParams& p);
// A(n): n-1 < |x|_inf <= n
SiteSet annulus_region(int n, const RenormParams& p);
// T_{sigma,J}(n): n-1 < |x|_inf <= n with 0 <= sigma_i x_i <= sigma_J x_J
SiteSet t_sigma_region(int n, const std::array<int, kMaxLatticeDim>& sigma, int J,
                       const RenormParams& p);
// B(z,m)
SiteSet box_region(const Site& z, int m, const RenormParams& p);

// ---- isometries -----------------------------------------------------------

Site apply_f(const Site& x, int d);                         // (x1, -x2, ..., -xd)
Site apply_g(const Site& x, const Site& a, int d);          // signs from a, sgn(0)=+1
Site apply_rotation(int r, const Site& x, int d);           // theta^r, theta: e1->e2
Site apply_psi(const std::array<int, kMaxLatticeDim>& sigma, int J, const Site& x, int d);
Site apply_abs1(const Site& x);                             // (|x1|, x2, ...)

SiteSet map_region(const SiteSet& region, const std::function<Site(const Site&)>& f);
SiteSet translate_region(const SiteSet& region, const Site& shift);

// template for a step in direction theta^r(e1) anchored at a: rotate, then
// flip the non-dominant coordinates away from the anchor (r=0 is g(.|a))
Site apply_step_frame(int r, const Site& a, const Site& x, int d);

// ---- renormalization building blocks --------------------------------------

// non-random boundary: sites outside R within Euclidean distance 1-2alpha
SiteSet region_boundary(const SiteSet& R, const RenormParams& p);

// K(m,n) relative to explicit region placements: G-vertices in region_t_n
// adjacent in G to a seed box contained in region_t_mn
SiteSet k_set(const LatticeField& field, const KernelSpec& kernel, int m,
              const SiteSet& region_t_n, const SiteSet& region_t_mn);

// the connectivity event: B(m) <-> K(m,n) inside B(n) for G
bool connectivity_event(const LatticeField& field, const KernelSpec& kernel, int m, int n);

struct EfSets {
    SiteSet e, f;
};

// cluster-extension increments E[C,B,i], F[C,B,B',i]
EfSets ef_extension(const SiteSet& C, const SiteSet& B, const SiteSet& Bprime, int layer,
                    const LatticeField& field, const KernelSpec& kernel);

struct OriginResult {
    bool s0 = false;
    bool s1 = false;
    SiteSet c1;
    std::array<Site, 4> c{}; // face anchors c^(1..4), valid when s1
};

// S0 = B(m) is a seed; C1 = cluster of B(m) in B0' for G; S1 = C1 meets all
// four rotated K-sets; face anchors are the lexicographically minimal seed
// centers. Asserts the c^(1) location bounds when s1 holds. All regions are
// translated by `origin`.
OriginResult occupied_origin(const LatticeField& field, const KernelSpec& kernel, int m, int n,
                             const Site& origin = Site{});

struct WilsonInterval {
    double p_hat = 0.0, lo = 0.0, hi = 0.0;
    int successes = 0, trials = 0;
};

WilsonInterval wilson_interval(int successes, int trials, double z = 1.959963984540054);

// conditional S1 frequency given S0, realized by planting the seed
WilsonInterval estimate_occupation_probability(const KernelSpec& kernel,
                                               const MarkDistribution& dist,
                                               const RenormParams& params, int m, int n,
                                               int trials, std::uint64_t master_seed);

// smallest (n, m) pair (ordered by n, then m) with 2m < n, 2m|n whose
// empirical connectivity-event frequency reaches 1 - eps_prime
struct MnSearchResult {
    int m = 0, n = 0;
    double frequency = 0.0;
};
std::optional<MnSearchResult> search_mn(const KernelSpec& kernel, const MarkDistribution& dist,
                                        const RenormParams& params, double eps_prime, int trials,
                                        int max_n, std::uint64_t master_seed);

// ---- iterative cluster growth ---------------------------------------------

struct RenormStep {
    int layer = 0;
    Site b{};
    bool success = false;
    std::size_t e_size = 0, f_size = 0;
    Site b_next{};
};

struct ClusterState {
    SiteSet cluster;
    Site anchor{}; // b^(i) for the next step
    std::vector<RenormStep> steps;
    std::vector<int> used_layers;
    bool alive = false;
};

ClusterState cluster_from_origin(const OriginResult& origin);

struct ExtendOutcome {
    bool success = false;
    SiteSet e, f;
    Site b_next{};
};

// One generic extension step in direction theta^r(e1). Asserts property p_i
// (disjointness of C u dC from the step regions) and layer freshness; when
// `check_e1_frame` the step is part of the axis chain from the origin and
// the location bounds b_1 = i N, |b_j| <= n - m and b + T_i(m,n) inside
// B((i+1) N e1, N) are asserted.
ExtendOutcome extend_cluster_step(ClusterState& state, int layer, int m, int n, int r,
                                  const LatticeField& field, const KernelSpec& kernel,
                                  int step_index_for_bounds = -1);

struct FanOutcome {
    bool success = false;
    SiteSet e, f;
    std::array<Site, 3> anchors{}; // forward, left, right seeds
};

// The terminal step of a linkage: connect to seeds adjacent to the three
// remaining faces (forward, +-transverse) through the hat regions. With
// `check_e1_frame` the fan sits at the 4N e1 position of the axis chain and
// the hat regions and anchors are asserted to land in their renormalized
// boxes (forward at 5N e1, transverse at 4N e1 +- N e2).
FanOutcome extend_cluster_fan(ClusterState& state, int layer, int m, int n, int r,
                              const LatticeField& field, const KernelSpec& kernel,
                              bool check_e1_frame = false);

} // namespace perc
