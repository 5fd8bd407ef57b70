#include "perc/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_set>

namespace perc {

using SiteHashSet = std::unordered_set<Site, SiteHash>;

bool set_contains(const SiteSet& set, const Site& s) {
    return std::binary_search(set.begin(), set.end(), s);
}

SiteSet set_union(const SiteSet& a, const SiteSet& b) {
    SiteSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool sets_intersect(const SiteSet& a, const SiteSet& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else
            return true;
    }
    return false;
}

namespace {

void sort_unique(SiteSet& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

SiteHashSet to_hash(const SiteSet& v) { return SiteHashSet(v.begin(), v.end()); }

// enumerate an inclusive integer box, filter by pred
template <class Pred>
SiteSet enumerate_box(int d, const Site& lo, const Site& hi, Pred pred) {
    SiteSet out;
    Site s = lo;
    for (int i = 0; i < d; ++i)
        if (lo[i] > hi[i]) return out;
    for (;;) {
        if (pred(s)) out.push_back(s);
        int i = 0;
        while (i < d && s[i] == hi[i]) {
            s[i] = lo[i];
            ++i;
        }
        if (i == d) break;
        ++s[i];
    }
    sort_unique(out);
    return out;
}

long long linf(const Site& s, int d) {
    long long m = 0;
    for (int i = 0; i < d; ++i) m = std::max(m, std::llabs(s[i]));
    return m;
}

double site_dist(const Site& a, const Site& b, int d, double eps) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dx = static_cast<double>(a[i] - b[i]) * eps;
        acc += dx * dx;
    }
    return std::sqrt(acc);
}

// offsets v != 0 with |v| * eps <= radius
std::vector<Site> ball_stencil(const RenormParams& p, double radius) {
    const double r_sites = radius * static_cast<double>(p.kappa);
    const long long reach = static_cast<long long>(std::floor(r_sites));
    std::vector<Site> out;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = -reach;
        hi[i] = reach;
    }
    Site s = lo;
    if (reach < 0) return out;
    for (;;) {
        double n2 = 0.0;
        for (int i = 0; i < p.d; ++i) n2 += static_cast<double>(s[i]) * static_cast<double>(s[i]);
        if (n2 > 0.0 && n2 <= r_sites * r_sites) out.push_back(s);
        int i = 0;
        while (i < p.d && s[i] == hi[i]) {
            s[i] = lo[i];
            ++i;
        }
        if (i == p.d) break;
        ++s[i];
    }
    return out;
}

Site add(const Site& a, const Site& b, int d) {
    Site s = a;
    for (int i = 0; i < d; ++i) s[i] += b[i];
    return s;
}

// G-edge test (slack 2 alpha) between sites with known A-values
bool g_edge(const KernelSpec& kernel, const RenormParams& p, const Site& x, double ax,
            const Site& y, double ay) {
    const double h = kernel.eval_norm(ax, ay) - 2.0 * p.alpha;
    if (h < 0.0) return false;
    return site_dist(x, y, p.d, p.eps()) <= h;
}

// connected component of `start` under G restricted to `allowed`
SiteSet g_cluster(const LatticeField& field, const KernelSpec& kernel, const SiteSet& start,
                  const SiteHashSet& allowed) {
    const RenormParams& p = field.params;
    const auto stencil = ball_stencil(p, 1.0 - 2.0 * p.alpha);
    SiteHashSet seen;
    std::vector<Site> queue;
    for (const Site& s : start) {
        if (!allowed.count(s)) continue;
        auto it = field.a.find(s);
        if (it == field.a.end()) continue;
        if (seen.insert(s).second) queue.push_back(s);
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const Site u = queue[head];
        const double au = field.a.at(u);
        for (const Site& off : stencil) {
            const Site v = add(u, off, p.d);
            if (seen.count(v) || !allowed.count(v)) continue;
            auto it = field.a.find(v);
            if (it == field.a.end()) continue;
            if (!g_edge(kernel, p, u, au, v, it->second)) continue;
            seen.insert(v);
            queue.push_back(v);
        }
    }
    SiteSet out(queue.begin(), queue.end());
    sort_unique(out);
    return out;
}

} // namespace

// ---- regions ---------------------------------------------------------------

SiteSet t_region(int n, const RenormParams& p) {
    const long long k = p.kappa;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = 0;
        hi[i] = n * k;
    }
    return enumerate_box(p.d, lo, hi, [&](const Site& s) {
        if (!(s[0] > (n - 1) * k && s[0] <= n * k)) return false;
        for (int i = 1; i < p.d; ++i)
            if (s[i] > s[0]) return false;
        return true;
    });
}

SiteSet t_region_mn(int m, int n, const RenormParams& p) {
    const long long k = p.kappa;
    Site lo, hi;
    lo[0] = n * k + 1;
    hi[0] = n * k + 1 + 2 * m * k;
    for (int i = 1; i < p.d; ++i) {
        lo[i] = 0;
        hi[i] = n * k;
    }
    return enumerate_box(p.d, lo, hi, [](const Site&) { return true; });
}

SiteSet annulus_region(int n, const RenormParams& p) {
    const long long k = p.kappa;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = -n * k;
        hi[i] = n * k;
    }
    return enumerate_box(p.d, lo, hi, [&](const Site& s) {
        const long long m = linf(s, p.d);
        return m > (n - 1) * k && m <= n * k;
    });
}

SiteSet t_sigma_region(int n, const std::array<int, kMaxLatticeDim>& sigma, int J,
                       const RenormParams& p) {
    if (J < 1 || J > p.d) throw std::invalid_argument("J out of range");
    const long long k = p.kappa;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = -n * k;
        hi[i] = n * k;
    }
    return enumerate_box(p.d, lo, hi, [&](const Site& s) {
        const long long m = linf(s, p.d);
        if (!(m > (n - 1) * k && m <= n * k)) return false;
        const long long top = sigma[J - 1] * s[J - 1];
        for (int i = 0; i < p.d; ++i) {
            const long long v = sigma[i] * s[i];
            if (v < 0 || v > top) return false;
        }
        return true;
    });
}

SiteSet box_region(const Site& z, int m, const RenormParams& p) {
    const long long r = static_cast<long long>(m) * p.kappa;
    Site lo, hi;
    for (int i = 0; i < p.d; ++i) {
        lo[i] = z[i] - r;
        hi[i] = z[i] + r;
    }
    return enumerate_box(p.d, lo, hi, [](const Site&) { return true; });
}

// ---- isometries ------------------------------------------------------------

Site apply_f(const Site& x, int d) {
    Site y = x;
    for (int i = 1; i < d; ++i) y[i] = -x[i];
    return y;
}

Site apply_g(const Site& x, const Site& a, int d) {
    Site y = x;
    for (int i = 1; i < d; ++i) {
        const int sgn = a[i] < 0 ? -1 : 1; // sgn(0) = +1
        y[i] = -sgn * x[i];
    }
    return y;
}

Site apply_rotation(int r, const Site& x, int d) {
    (void)d;
    Site y = x;
    r = ((r % 4) + 4) % 4;
    for (int t = 0; t < r; ++t) {
        const long long x1 = y[0], x2 = y[1];
        y[0] = -x2;
        y[1] = x1;
    }
    return y;
}

Site apply_psi(const std::array<int, kMaxLatticeDim>& sigma, int J, const Site& x, int d) {
    Site y{};
    for (int kk = 0; kk < d; ++kk) {
        if (kk == 0)
            y[kk] = x[J - 1] * sigma[0];
        else if (kk == J - 1)
            y[kk] = x[0] * sigma[J - 1];
        else
            y[kk] = x[kk] * sigma[kk];
    }
    return y;
}

Site apply_abs1(const Site& x) {
    Site y = x;
    y[0] = std::llabs(x[0]);
    return y;
}

SiteSet map_region(const SiteSet& region, const std::function<Site(const Site&)>& f) {
    SiteSet out;
    out.reserve(region.size());
    for (const Site& s : region) out.push_back(f(s));
    sort_unique(out);
    return out;
}

SiteSet translate_region(const SiteSet& region, const Site& shift) {
    SiteSet out;
    out.reserve(region.size());
    for (const Site& s : region) {
        Site t = s;
        for (int i = 0; i < kMaxLatticeDim; ++i) t[i] += shift[i];
        out.push_back(t);
    }
    // translation preserves lexicographic order
    return out;
}

Site apply_step_frame(int r, const Site& a, const Site& x, int d) {
    const Site z = apply_rotation(r, x, d);
    Site dom = apply_rotation(r, Site{{1, 0, 0, 0}}, d);
    Site y = z;
    for (int i = 0; i < d; ++i) {
        if (dom[i] != 0) continue; // keep the dominant axis
        const int sgn = a[i] < 0 ? -1 : 1;
        y[i] = -sgn * z[i];
    }
    return y;
}

// ---- building blocks --------------------------------------------------------

SiteSet region_boundary(const SiteSet& R, const RenormParams& p) {
    const auto stencil = ball_stencil(p, 1.0 - 2.0 * p.alpha);
    SiteHashSet in_r = to_hash(R);
    SiteSet out;
    for (const Site& s : R)
        for (const Site& off : stencil) {
            const Site v = add(s, off, p.d);
            if (!in_r.count(v)) out.push_back(v);
        }
    sort_unique(out);
    return out;
}

namespace {

// all seed-box sites for seeds B(z,m) contained in `region`
SiteSet region_seed_sites(const LatticeField& field, int m, const SiteSet& region) {
    const RenormParams& p = field.params;
    SiteHashSet in_region = to_hash(region);
    const long long r = static_cast<long long>(m) * p.kappa;
    SiteSet out;
    for (const Site& z : region) {
        bool inside = true;
        // cheap corner check first
        for (int i = 0; inside && i < p.d; ++i) {
            Site c1 = z, c2 = z;
            c1[i] -= r;
            c2[i] += r;
            if (!in_region.count(c1) || !in_region.count(c2)) inside = false;
        }
        if (!inside) continue;
        SiteSet box = box_region(z, m, p);
        bool ok = true;
        for (const Site& s : box) {
            if (!in_region.count(s)) {
                ok = false;
                break;
            }
            auto it = field.a.find(s);
            if (it == field.a.end() || !p.u_star.contains(it->second)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        out.insert(out.end(), box.begin(), box.end());
    }
    sort_unique(out);
    return out;
}

} // namespace

SiteSet k_set(const LatticeField& field, const KernelSpec& kernel, int m,
              const SiteSet& region_t_n, const SiteSet& region_t_mn) {
    const RenormParams& p = field.params;
    const SiteSet seed_sites = region_seed_sites(field, m, region_t_mn);
    SiteSet out;
    if (seed_sites.empty()) return out;
    for (const Site& x : region_t_n) {
        auto it = field.a.find(x);
        if (it == field.a.end()) continue;
        for (const Site& y : seed_sites) {
            if (g_edge(kernel, p, x, it->second, y, field.a.at(y))) {
                out.push_back(x);
                break;
            }
        }
    }
    sort_unique(out);
    return out;
}

bool connectivity_event(const LatticeField& field, const KernelSpec& kernel, int m, int n) {
    const RenormParams& p = field.params;
    if (m < 1 || n < m) throw std::invalid_argument("connectivity event needs 1 <= m <= n");
    {
        Site corner_lo{}, corner_hi{};
        for (int i = 0; i < p.d; ++i) {
            corner_lo[i] = -static_cast<long long>(n) * p.kappa;
            corner_hi[i] = static_cast<long long>(n) * p.kappa;
        }
        corner_hi[0] = static_cast<long long>(n + 2 * m) * p.kappa + 1;
        if (!field.window.contains(corner_lo) || !field.window.contains(corner_hi))
            throw std::out_of_range("field window does not cover B(n) and T(m,n)");
    }
    const SiteSet tn = t_region(n, p);
    const SiteSet tmn = t_region_mn(m, n, p);
    const SiteSet kset = k_set(field, kernel, m, tn, tmn);
    if (kset.empty()) return false;
    const SiteSet bn = box_region(Site{}, n, p);
    const SiteSet bm = box_region(Site{}, m, p);
    const SiteSet cluster = g_cluster(field, kernel, bm, to_hash(bn));
    return sets_intersect(cluster, kset);
}

EfSets ef_extension(const SiteSet& C, const SiteSet& B, const SiteSet& Bprime, int layer,
                    const LatticeField& field, const KernelSpec& kernel) {
    const RenormParams& p = field.params;
    if (layer < 0 || layer >= static_cast<int>(field.t.size()))
        throw std::invalid_argument("layer index out of range");
    const SiteSet dC = region_boundary(C, p);
    const auto stencil = ball_stencil(p, 1.0 - 2.0 * p.alpha);
    SiteHashSet c_hash = to_hash(C);
    SiteHashSet b_hash = to_hash(B);

    EfSets out;
    const auto& tmap = field.t[layer];
    for (const Site& z1 : dC) {
        if (!b_hash.count(z1)) continue;
        auto it1 = tmap.find(z1);
        if (it1 == tmap.end() || !p.u_star.contains(it1->second)) continue;
        bool linked = false;
        for (const Site& off : stencil) {
            const Site z0 = add(z1, off, p.d);
            if (!c_hash.count(z0)) continue;
            auto it0 = tmap.find(z0);
            if (it0 != tmap.end() && p.u_star.contains(it0->second)) {
                linked = true;
                break;
            }
        }
        if (linked) out.e.push_back(z1);
    }
    sort_unique(out.e);

    // allowed region for F: B' minus (C u dC)
    SiteHashSet allowed;
    {
        SiteHashSet dc_hash = to_hash(dC);
        for (const Site& s : Bprime)
            if (!c_hash.count(s) && !dc_hash.count(s)) allowed.insert(s);
    }
    // entry points: z2 in allowed with A finite, near some z1 in E
    SiteSet entry;
    for (const Site& z1 : out.e)
        for (const Site& off : stencil) {
            const Site z2 = add(z1, off, p.d);
            if (!allowed.count(z2)) continue;
            auto it = field.a.find(z2);
            if (it == field.a.end()) continue;
            const double reach = kernel.h_star_norm(it->second) - 2.0 * p.alpha;
            if (reach >= 0.0 && site_dist(z1, z2, p.d, p.eps()) <= reach) entry.push_back(z2);
        }
    sort_unique(entry);
    out.f = g_cluster(field, kernel, entry, allowed);
    return out;
}

OriginResult occupied_origin(const LatticeField& field, const KernelSpec& kernel, int m, int n,
                             const Site& origin) {
    const RenormParams& p = field.params;
    if (!(m >= 1 && 2 * m < n)) throw std::invalid_argument("occupied origin needs 1 <= m, 2m < n");
    OriginResult res;
    res.s0 = is_seed(field, origin, m);
    if (!res.s0) return res;

    const SiteSet tn = t_region(n, p);
    const SiteSet tmn = t_region_mn(m, n, p);
    SiteSet b0p = box_region(origin, n, p);
    std::array<SiteSet, 4> rot_tn, rot_tmn;
    for (int j = 0; j < 4; ++j) {
        auto rot = [&](const Site& s) { return apply_rotation(j, s, p.d); };
        rot_tn[j] = translate_region(map_region(tn, rot), origin);
        rot_tmn[j] = translate_region(map_region(tmn, rot), origin);
        b0p = set_union(b0p, rot_tmn[j]);
    }
    for (const Site& s : b0p)
        if (!field.window.contains(s)) throw std::out_of_range("field window does not cover B0'");

    const SiteSet bm = box_region(origin, m, p);
    res.c1 = g_cluster(field, kernel, bm, to_hash(b0p));

    res.s1 = true;
    SiteHashSet c1_hash = to_hash(res.c1);
    for (int j = 0; j < 4 && res.s1; ++j) {
        const SiteSet kj = k_set(field, kernel, m, rot_tn[j], rot_tmn[j]);
        if (!sets_intersect(res.c1, kj)) res.s1 = false;
    }
    if (!res.s1) return res;

    // face anchors: lexicographically minimal seed centers inside C1
    for (int j = 0; j < 4; ++j) {
        bool found = false;
        for (const Site& z : rot_tmn[j]) { // sorted, so the first hit is minimal
            SiteSet box = box_region(z, m, p);
            bool ok = true;
            for (const Site& s : box)
                if (!c1_hash.count(s) || !set_contains(rot_tmn[j], s)) {
                    ok = false;
                    break;
                }
            if (ok && is_seed(field, z, m)) {
                res.c[j] = z;
                found = true;
                break;
            }
        }
        if (!found) throw std::logic_error("S1 holds but no face seed found");
    }
    // location identity for the +e1 anchor
    const long long Nk = static_cast<long long>(n + m) * p.kappa + 1;
    if (res.c[0][0] - origin[0] != Nk)
        throw std::logic_error("face anchor violates its first-coordinate identity");
    for (int i = 1; i < p.d; ++i) {
        const long long rel = res.c[0][i] - origin[i];
        if (rel < static_cast<long long>(m) * p.kappa || rel > static_cast<long long>(n - m) * p.kappa)
            throw std::logic_error("face anchor violates its coordinate bounds");
    }
    return res;
}

WilsonInterval wilson_interval(int successes, int trials, double z) {
    if (trials < 1) throw std::invalid_argument("interval needs trials >= 1");
    WilsonInterval w;
    w.successes = successes;
    w.trials = trials;
    const double n = trials, ph = successes / n, z2 = z * z;
    w.p_hat = ph;
    const double denom = 1.0 + z2 / n;
    const double center = (ph + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
    w.lo = std::max(0.0, center - half);
    w.hi = std::min(1.0, center + half);
    return w;
}

namespace {

IBox bounding_window(const SiteSet& sites, int d, long long margin) {
    IBox w;
    w.d = d;
    for (int i = 0; i < d; ++i) {
        w.lo[i] = sites.front()[i];
        w.hi[i] = sites.front()[i];
    }
    for (const Site& s : sites)
        for (int i = 0; i < d; ++i) {
            w.lo[i] = std::min(w.lo[i], s[i]);
            w.hi[i] = std::max(w.hi[i], s[i]);
        }
    for (int i = 0; i < d; ++i) {
        w.lo[i] -= margin;
        w.hi[i] += margin;
    }
    return w;
}

} // namespace

WilsonInterval estimate_occupation_probability(const KernelSpec& kernel,
                                               const MarkDistribution& dist,
                                               const RenormParams& params, int m, int n,
                                               int trials, std::uint64_t master_seed) {
    if (trials < 1) throw std::invalid_argument("estimator needs trials >= 1");
    if (!(m >= 1 && 2 * m < n)) throw std::invalid_argument("needs 1 <= m and 2m < n");
    SiteSet b0p = box_region(Site{}, n, params);
    const SiteSet tmn = t_region_mn(m, n, params);
    for (int j = 0; j < 4; ++j)
        b0p = set_union(b0p, map_region(tmn, [&](const Site& s) {
                            return apply_rotation(j, s, params.d);
                        }));
    const IBox window = bounding_window(b0p, params.d, 0);

    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        RngStream rng = RngStream::derive(master_seed, {0x0cc, static_cast<std::uint64_t>(t)});
        LatticeField field = build_fields(params, window, dist, rng);
        plant_seed(field, Site{}, m, dist, rng); // conditioning on S0
        OriginResult r = occupied_origin(field, kernel, m, n);
        if (!r.s0) throw std::logic_error("planted seed not detected");
        if (r.s1) ++hits;
    }
    return wilson_interval(hits, trials);
}

std::optional<MnSearchResult> search_mn(const KernelSpec& kernel, const MarkDistribution& dist,
                                        const RenormParams& params, double eps_prime, int trials,
                                        int max_n, std::uint64_t master_seed) {
    if (trials < 1) throw std::invalid_argument("search needs trials >= 1");
    for (int n = 3; n <= max_n; ++n) {
        for (int m = 1; 2 * m < n; ++m) {
            if (n % (2 * m) != 0) continue;
            IBox window;
            window.d = params.d;
            for (int i = 0; i < params.d; ++i) {
                window.lo[i] = -static_cast<long long>(n) * params.kappa;
                window.hi[i] = static_cast<long long>(n) * params.kappa;
            }
            window.hi[0] = static_cast<long long>(n + 2 * m) * params.kappa + 1;
            int hits = 0;
            for (int t = 0; t < trials; ++t) {
                RngStream rng = RngStream::derive(
                    master_seed, {0x303, static_cast<std::uint64_t>(n * 64 + m),
                                  static_cast<std::uint64_t>(t)});
                LatticeField field = build_fields(params, window, dist, rng);
                if (connectivity_event(field, kernel, m, n)) ++hits;
            }
            const double freq = static_cast<double>(hits) / trials;
            if (freq >= 1.0 - eps_prime) return MnSearchResult{m, n, freq};
        }
    }
    return std::nullopt;
}

// ---- cluster growth ----------------------------------------------------------

ClusterState cluster_from_origin(const OriginResult& origin) {
    if (!(origin.s0 && origin.s1))
        throw std::invalid_argument("cluster growth starts from an occupied origin");
    ClusterState st;
    st.cluster = origin.c1;
    st.anchor = origin.c[0]; // b^(1) := c^(1)
    st.alive = true;
    return st;
}

namespace {

struct StepRegions {
    SiteSet tn, tmn; // anchored placements b + T_i(.)
};

StepRegions make_step_regions(int r, const Site& b, int m, int n, const RenormParams& p) {
    const SiteSet tn = t_region(n, p);
    const SiteSet tmn = t_region_mn(m, n, p);
    auto frame = [&](const Site& x) { return apply_step_frame(r, b, x, p.d); };
    StepRegions out;
    out.tn = translate_region(map_region(tn, frame), b);
    out.tmn = translate_region(map_region(tmn, frame), b);
    return out;
}

Site find_anchor_seed(const LatticeField& field, int m, const SiteSet& region,
                      const SiteHashSet& cluster_hash) {
    const RenormParams& p = field.params;
    for (const Site& z : region) { // region sorted: first hit is lexic. minimal
        SiteSet box = box_region(z, m, p);
        bool ok = true;
        for (const Site& s : box)
            if (!cluster_hash.count(s) || !set_contains(region, s)) {
                ok = false;
                break;
            }
        if (ok && is_seed(field, z, m)) return z;
    }
    throw std::logic_error("success event holds but no anchor seed found");
}

void check_layer_fresh(ClusterState& st, int layer) {
    for (int used : st.used_layers)
        if (used == layer)
            throw std::invalid_argument("layer index already used in this exploration");
}

} // namespace

ExtendOutcome extend_cluster_step(ClusterState& state, int layer, int m, int n, int r,
                                  const LatticeField& field, const KernelSpec& kernel,
                                  int step_index_for_bounds) {
    if (!state.alive) throw std::logic_error("cluster is frozen after a failed step");
    check_layer_fresh(state, layer);
    const RenormParams& p = field.params;
    const Site b = state.anchor;
    const StepRegions reg = make_step_regions(r, b, m, n, p);

    // property p_i: (C u dC) must not touch the step regions
    const SiteSet closure = set_union(state.cluster, region_boundary(state.cluster, p));
    if (sets_intersect(closure, reg.tn) || sets_intersect(closure, reg.tmn))
        throw std::logic_error("step invariant violated: cluster closure meets the step regions");

    const SiteSet kset = k_set(field, kernel, m, reg.tn, reg.tmn);
    const SiteSet B = box_region(b, n, p);
    const SiteSet Bprime = set_union(B, reg.tmn);
    EfSets ef = ef_extension(state.cluster, B, Bprime, layer, field, kernel);
    SiteSet grown = set_union(state.cluster, set_union(ef.e, ef.f));

    ExtendOutcome out;
    out.e = ef.e;
    out.f = ef.f;
    out.success = sets_intersect(grown, kset);

    RenormStep rec;
    rec.layer = layer;
    rec.b = b;
    rec.success = out.success;
    rec.e_size = ef.e.size();
    rec.f_size = ef.f.size();

    state.cluster = std::move(grown);
    state.used_layers.push_back(layer);
    if (!out.success) {
        state.alive = false;
        state.steps.push_back(rec);
        return out;
    }
    out.b_next = find_anchor_seed(field, m, reg.tmn, to_hash(state.cluster));
    rec.b_next = out.b_next;
    state.anchor = out.b_next;
    state.steps.push_back(rec);

    if (step_index_for_bounds >= 1) {
        // axis-chain location claims: the step regions live in the next
        // renormalized box and the new anchor sits on the axis slab
        const int i = step_index_for_bounds;
        const long long Nk = static_cast<long long>(n + m) * p.kappa + 1;
        Site center{};
        center[0] = static_cast<long long>(i + 1) * Nk;
        for (const Site& s : reg.tmn) {
            Site dfc = s;
            for (int c = 0; c < p.d; ++c) dfc[c] -= center[c];
            if (linf(dfc, p.d) > Nk)
                throw std::logic_error("step region escapes the next renormalized box");
        }
        if (out.b_next[0] != center[0])
            throw std::logic_error("anchor violates its first-coordinate identity");
        for (int c = 1; c < p.d; ++c)
            if (std::llabs(out.b_next[c]) > static_cast<long long>(n - m) * p.kappa)
                throw std::logic_error("anchor violates its transverse bounds");
    }
    return out;
}

FanOutcome extend_cluster_fan(ClusterState& state, int layer, int m, int n, int r,
                              const LatticeField& field, const KernelSpec& kernel,
                              bool check_e1_frame) {
    if (!state.alive) throw std::logic_error("cluster is frozen after a failed step");
    check_layer_fresh(state, layer);
    const RenormParams& p = field.params;
    const Site b = state.anchor;
    const Site a0 = apply_rotation(-r, b, p.d); // sign source in the base frame

    const SiteSet tn = t_region(n, p);
    const SiteSet tmn = t_region_mn(m, n, p);
    auto hat_tpl = [&](int j, const SiteSet& base) {
        // j=0: g(.|a0); j=1: abs1 o theta of it; j=2: abs1 o theta^3 of it
        SiteSet g0 = map_region(base, [&](const Site& x) { return apply_g(x, a0, p.d); });
        if (j == 0) return g0;
        const int rot = j == 1 ? 1 : 3;
        return map_region(g0, [&](const Site& x) { return apply_abs1(apply_rotation(rot, x, p.d)); });
    };
    std::array<SiteSet, 3> hat_tn, hat_tmn;
    for (int j = 0; j < 3; ++j) {
        auto lift = [&](const Site& x) { return apply_rotation(r, x, p.d); };
        hat_tn[j] = translate_region(map_region(hat_tpl(j, tn), lift), b);
        hat_tmn[j] = translate_region(map_region(hat_tpl(j, tmn), lift), b);
    }

    const SiteSet closure = set_union(state.cluster, region_boundary(state.cluster, p));
    for (int j = 0; j < 3; ++j)
        if (sets_intersect(closure, hat_tn[j]) || sets_intersect(closure, hat_tmn[j]))
            throw std::logic_error("fan invariant violated: cluster closure meets a hat region");

    const SiteSet B = box_region(b, n, p);
    SiteSet Bprime = B;
    for (int j = 0; j < 3; ++j) Bprime = set_union(Bprime, hat_tmn[j]);
    EfSets ef = ef_extension(state.cluster, B, Bprime, layer, field, kernel);
    SiteSet grown = set_union(state.cluster, set_union(ef.e, ef.f));

    FanOutcome out;
    out.e = ef.e;
    out.f = ef.f;
    out.success = true;
    for (int j = 0; j < 3 && out.success; ++j) {
        const SiteSet kj = k_set(field, kernel, m, hat_tn[j], hat_tmn[j]);
        if (!sets_intersect(grown, kj)) out.success = false;
    }

    RenormStep rec;
    rec.layer = layer;
    rec.b = b;
    rec.success = out.success;
    rec.e_size = ef.e.size();
    rec.f_size = ef.f.size();
    state.cluster = std::move(grown);
    state.used_layers.push_back(layer);
    state.steps.push_back(rec);
    if (!out.success) {
        state.alive = false;
        return out;
    }
    SiteHashSet cluster_hash = to_hash(state.cluster);
    for (int j = 0; j < 3; ++j)
        out.anchors[j] = find_anchor_seed(field, m, hat_tmn[j], cluster_hash);

    if (check_e1_frame) {
        // hat regions and their anchors land in the renormalized boxes around
        // 5N e1 and 4N e1 +- N e2
        const long long Nk = static_cast<long long>(n + m) * p.kappa + 1;
        std::array<Site, 3> centers{};
        centers[0][0] = 5 * Nk;
        centers[1][0] = 4 * Nk;
        centers[1][1] = b[1] + Nk;
        centers[2][0] = 4 * Nk;
        centers[2][1] = b[1] - Nk;
        for (int j = 0; j < 3; ++j)
            for (const Site& s : hat_tmn[j]) {
                Site dfc = s;
                for (int c = 0; c < p.d; ++c) dfc[c] -= centers[j][c];
                if (linf(dfc, p.d) > Nk)
                    throw std::logic_error("hat region escapes its renormalized box");
            }
        if (out.anchors[0][0] != 5 * Nk || out.anchors[1][1] != b[1] + Nk ||
            out.anchors[2][1] != b[1] - Nk)
            throw std::logic_error("fan anchor violates its coordinate identity");
        for (int j = 1; j < 3; ++j)
            if (out.anchors[j][0] < 4 * Nk + static_cast<long long>(m) * p.kappa ||
                out.anchors[j][0] > 4 * Nk + static_cast<long long>(n - m) * p.kappa)
                throw std::logic_error("fan anchor violates its first-coordinate bounds");
    }
    return out;
}

} // namespace perc
