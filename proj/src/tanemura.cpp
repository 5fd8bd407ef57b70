#include "perc/tanemura.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace perc {
namespace tanemura {

namespace {

Pt quarter_turn(Pt v) { return {-v.y, v.x}; } // anticlockwise

bool adjacent(Pt a, Pt b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1; }

} // namespace

std::vector<Pt> boundary_order(const std::vector<Pt>& string) {
    const int n = static_cast<int>(string.size());
    if (n == 0) throw std::invalid_argument("boundary order needs a nonempty string");
    std::set<Pt> in_string(string.begin(), string.end());
    if (static_cast<int>(in_string.size()) != n)
        throw std::invalid_argument("string points must be distinct");
    // connectivity of the set
    {
        std::vector<Pt> queue{string[0]};
        std::set<Pt> seen{string[0]};
        for (std::size_t h = 0; h < queue.size(); ++h)
            for (const Pt& p : string)
                if (!seen.count(p) && adjacent(queue[h], p)) {
                    seen.insert(p);
                    queue.push_back(p);
                }
        if (static_cast<int>(seen.size()) != n)
            throw std::invalid_argument("string points must form a connected set");
    }

    // x_0 := x_1 - e_1; indices below are 1-based string positions
    const Pt x0{string[0].x - 1, string[0].y};
    auto point_at = [&](int idx) { return idx == 0 ? x0 : string[idx - 1]; };

    std::set<Pt> assigned;
    std::vector<Pt> descending;
    for (int k = n; k >= 1; --k) {
        const Pt xk = string[k - 1];
        int a_k = -1;
        for (int j = n; j >= 0; --j) {
            if (j == k) continue;
            if (adjacent(xk, point_at(j))) {
                a_k = j;
                break;
            }
        }
        if (a_k < 0) throw std::invalid_argument("string has an isolated point");
        Pt v{point_at(a_k).x - xk.x, point_at(a_k).y - xk.y};
        // group of x_k: boundary neighbors of x_k not claimed by larger k,
        // in decreasing quarter-turn order
        for (int t = 1; t <= 4; ++t) {
            v = quarter_turn(v);
            const Pt cand{xk.x + v.x, xk.y + v.y};
            if (in_string.count(cand) || assigned.count(cand)) continue;
            // claimed by the group of the largest neighbor index
            bool later = false;
            for (int j = k + 1; j <= n && !later; ++j)
                if (adjacent(cand, string[j - 1])) later = true;
            if (later) continue;
            assigned.insert(cand);
            descending.push_back(cand);
        }
    }
    std::reverse(descending.begin(), descending.end());
    return descending;
}

ScriptedOracle ScriptedOracle::parse(std::istream& is) {
    std::vector<Line> lines;
    std::string row;
    while (std::getline(is, row)) {
        const auto hash = row.find('#');
        if (hash != std::string::npos) row.resize(hash);
        std::istringstream ss(row);
        Line l;
        int answer;
        if (ss >> l.q.s >> l.q.j >> l.q.candidate.x >> l.q.candidate.y >> l.q.attach >> answer) {
            l.answer = answer != 0;
            lines.push_back(l);
        }
    }
    return ScriptedOracle(std::move(lines));
}

bool ScriptedOracle::occupied_and_linked(const OracleQuery& q) {
    if (next_ >= lines_.size()) throw std::runtime_error("scripted oracle exhausted");
    const Line& l = lines_[next_];
    if (l.q.s != q.s || l.q.j != q.j || !(l.q.candidate == q.candidate) || l.q.attach != q.attach) {
        std::ostringstream msg;
        msg << "scripted oracle mismatch at line " << next_ + 1 << ": expected query s=" << l.q.s
            << " j=" << l.q.j << " p=(" << l.q.candidate.x << ',' << l.q.candidate.y
            << ") k=" << l.q.attach << ", got s=" << q.s << " j=" << q.j << " p=(" << q.candidate.x
            << ',' << q.candidate.y << ") k=" << q.attach;
        throw std::runtime_error(msg.str());
    }
    ++next_;
    return l.answer;
}

void write_script(std::ostream& os, const std::vector<ScriptedOracle::Line>& lines) {
    for (const auto& l : lines)
        os << l.q.s << ' ' << l.q.j << ' ' << l.q.candidate.x << ' ' << l.q.candidate.y << ' '
           << l.q.attach << ' ' << (l.answer ? 1 : 0) << '\n';
}

std::vector<Pt> RowTrace::e_set(int upto_j) const {
    std::vector<Pt> out;
    if (start_occupied && upto_j >= 1) out.push_back(start);
    for (int i = 0; i + 2 <= upto_j && i < static_cast<int>(additions.size()); ++i)
        if (additions[i].occupied) out.push_back(additions[i].point);
    return out;
}

std::vector<Pt> RowTrace::f_set(int upto_j) const {
    std::vector<Pt> out;
    if (!start_occupied && upto_j >= 1) out.push_back(start);
    for (int i = 0; i + 2 <= upto_j && i < static_cast<int>(additions.size()); ++i)
        if (!additions[i].occupied) out.push_back(additions[i].point);
    return out;
}

TanemuraResult run_tanemura(int M, OccupancyOracle& oracle) {
    if (M < 1) throw std::invalid_argument("box parameter M must be >= 1");
    const int width = M + 2; // x in [0, M+1]
    auto in_lambda = [&](Pt p) { return p.x >= 0 && p.x <= M + 1 && p.y >= 0 && p.y <= M - 1; };

    TanemuraResult res;
    res.m = M;
    res.zeta.assign(static_cast<std::size_t>(width) * M, 0);
    res.rows.resize(M);

    std::set<Pt> visited;
    // starts are reserved from the very beginning
    for (int s = 0; s < M; ++s) visited.insert(Pt{0, s});

    // first all C^s_1 in row order
    for (int s = 0; s < M; ++s) {
        RowTrace& row = res.rows[s];
        row.start = Pt{0, s};
        OracleQuery q{s, 1, row.start, 0};
        row.start_occupied = oracle.occupied_and_linked(q);
        if (row.start_occupied) res.zeta[static_cast<std::size_t>(s) * width + 0] = 1;
    }

    // then each row runs to completion
    for (int s = 0; s < M; ++s) {
        RowTrace& row = res.rows[s];
        if (!row.start_occupied) {
            row.stop_j = 1;
            continue;
        }
        std::vector<Pt> e_string{row.start}; // insertion-ordered E
        std::vector<int> e_labels{1};        // labels r of x^s_r in E
        row.stop_j = 0;
        for (int j = 1; j < M * M; ++j) {
            // property P^s_j
            bool touches_right = false;
            for (const Pt& p : e_string)
                if (p.x == M + 1) touches_right = true;
            std::vector<Pt> candidates;
            if (!touches_right) {
                for (const Pt& b : boundary_order(e_string))
                    if (in_lambda(b) && !visited.count(b)) candidates.push_back(b);
            }
            if (touches_right || candidates.empty()) {
                row.stop_j = j;
                break;
            }
            const Pt next = candidates.back(); // the largest w.r.t. the order
            // attach point: largest label k with x^s_k in E adjacent to next
            int attach = 0;
            Pt attach_point{};
            for (std::size_t i = 0; i < e_string.size(); ++i)
                if (adjacent(e_string[i], next) && e_labels[i] > attach) {
                    attach = e_labels[i];
                    attach_point = e_string[i];
                }
            if (attach == 0) throw std::logic_error("boundary candidate without attach point");

            OracleQuery q{s, j + 1, next, attach, attach_point};
            const bool occ = oracle.occupied_and_linked(q);
            visited.insert(next);
            row.additions.push_back(RowTrace::Addition{next, occ, attach});
            if (occ) {
                e_string.push_back(next);
                e_labels.push_back(j + 1);
                res.zeta[static_cast<std::size_t>(next.y) * width + next.x] = 1;
            }
        }
        for (const Pt& p : e_string)
            if (p.x == M + 1) row.crossed = true;
        if (row.crossed) ++res.crossings;
    }
    return res;
}

int count_crossings_of_zeta(const TanemuraResult& r) {
    const int M = r.m;
    const int width = M + 2;
    std::vector<Pt> occupied;
    std::map<Pt, int> index;
    for (int y = 0; y < M; ++y)
        for (int x = 0; x < width; ++x)
            if (r.zeta_at(x, y)) {
                index[Pt{x, y}] = static_cast<int>(occupied.size());
                occupied.push_back(Pt{x, y});
            }
    std::vector<std::vector<int>> adj(occupied.size());
    std::vector<RegionTag> tags(occupied.size());
    for (std::size_t i = 0; i < occupied.size(); ++i) {
        const Pt p = occupied[i];
        tags[i] = p.x == 0 ? RegionTag::Source : p.x == M + 1 ? RegionTag::Sink : RegionTag::Interior;
        const Pt nbrs[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
        for (const Pt& q : nbrs) {
            auto it = index.find(q);
            if (it != index.end()) adj[i].push_back(it->second);
        }
        std::sort(adj[i].begin(), adj[i].end());
    }
    CrossingResult res = max_disjoint_paths(adj, tags);
    verify_witnesses(res, adj, tags);
    return res.count;
}

void dump_zeta(std::ostream& os, const TanemuraResult& r) {
    for (int y = r.m - 1; y >= 0; --y) {
        for (int x = 0; x < r.m + 2; ++x) os << (r.zeta_at(x, y) ? '1' : '0');
        os << '\n';
    }
}

// ---------------------------------------------------------------- renorm oracle

RenormOracle::RenormOracle(const KernelSpec& kernel, const MarkDistribution& dist,
                           const RenormParams& params, int m, int n, int M, std::uint64_t seed)
    : kernel_(kernel), params_(params), m_(m), n_(n), M_(M) {
    if (params.d < 2) throw std::invalid_argument("renorm oracle needs d >= 2");
    if (m < 2 || 2 * m >= n)
        throw std::invalid_argument("renorm oracle needs block scales with 2 <= m and 2m < n");
    const long long Nk = static_cast<long long>(n + m) * params.kappa + 1;
    cell_ = 4 * Nk;
    IBox w;
    w.d = params.d;
    const long long margin = 2 * Nk + static_cast<long long>(m) * params.kappa + 2;
    w.lo[0] = -margin;
    w.hi[0] = cell_ * (M + 1) + margin;
    w.lo[1] = -margin;
    w.hi[1] = cell_ * std::max(0, M - 1) + margin;
    for (int i = 2; i < params.d; ++i) {
        w.lo[i] = -margin;
        w.hi[i] = margin;
    }
    RngStream rng = RngStream::derive(seed, {0x7a1e});
    field_ = build_fields(params, w, dist, rng);
    // pre-seed every start anchor: this realizes the conditioned law the
    // construction runs under
    for (int s = 0; s < M; ++s) plant_seed(field_, renorm_site(Pt{0, s}), m_, dist, rng);
    nodes_.assign(static_cast<std::size_t>(M + 2) * M, NodeState{});
    cluster_of_.assign(nodes_.size(), -1);
}

Site RenormOracle::renorm_site(Pt p) const {
    Site s{};
    s[0] = cell_ * p.x;
    s[1] = cell_ * p.y;
    return s;
}

int RenormOracle::next_layer() {
    const int layer = layer_cursor_;
    layer_cursor_ = (layer_cursor_ + 1) % params_.K;
    return layer;
}

bool RenormOracle::occupied_and_linked(const OracleQuery& q) {
    const int node = q.candidate.y * (M_ + 2) + q.candidate.x;
    NodeState& st = nodes_[node];
    if (q.attach == 0) {
        // occupation of a start anchor
        OriginResult origin = occupied_origin(field_, kernel_, m_, n_, renorm_site(q.candidate));
        st.evaluated = true;
        st.occupied = origin.s0 && origin.s1;
        if (st.occupied) {
            st.face_anchor = origin.c;
            st.face_ready = {true, true, true, true};
            clusters_.push_back(std::make_unique<ClusterState>(cluster_from_origin(origin)));
            cluster_of_[node] = static_cast<int>(clusters_.size()) - 1;
        }
        return st.occupied;
    }

    // link probe: direction from the attach point to the candidate
    const Pt cand = q.candidate;
    const Pt u = q.attach_point;
    if (u.x < 0 || u.x > M_ + 1 || u.y < 0 || u.y > M_ - 1) return false;
    const int from = u.y * (M_ + 2) + u.x;
    if (!nodes_[from].occupied || cluster_of_[from] < 0) return false;
    const Pt v{cand.x - u.x, cand.y - u.y};
    int r = 0;
    if (v == Pt{1, 0})
        r = 0;
    else if (v == Pt{0, 1})
        r = 1;
    else if (v == Pt{-1, 0})
        r = 2;
    else if (v == Pt{0, -1})
        r = 3;
    else
        return false;

    NodeState& src = nodes_[from];
    if (!src.face_ready[r]) return false;
    ClusterState& cl = *clusters_[cluster_of_[from]];
    if (!cl.alive) return false;
    cl.anchor = src.face_anchor[r];
    cl.used_layers.clear(); // fresh sprinkling indices for this exploration region

    Site back_anchor{};
    bool linked = true;
    try {
        for (int i = 1; i <= 3 && linked; ++i) {
            if (i == 3) back_anchor = cl.anchor;
            linked = extend_cluster_step(cl, next_layer(), m_, n_, r, field_, kernel_).success;
        }
        FanOutcome fan;
        if (linked) {
            fan = extend_cluster_fan(cl, next_layer(), m_, n_, r, field_, kernel_);
            linked = fan.success;
        }
        if (linked) {
            NodeState& dst = nodes_[node];
            dst.evaluated = true;
            dst.occupied = true;
            dst.face_anchor[r] = fan.anchors[0];
            dst.face_anchor[(r + 1) % 4] = fan.anchors[1];
            dst.face_anchor[(r + 3) % 4] = fan.anchors[2];
            dst.face_anchor[(r + 2) % 4] = back_anchor;
            dst.face_ready = {true, true, true, true};
            cluster_of_[node] = cluster_of_[from];
        }
    } catch (const std::logic_error&) {
        // geometric invariant failed under this demo wiring: report the link
        // as unsuccessful rather than aborting the schedule
        linked = false;
        cl.alive = false;
    }
    return linked;
}

} // namespace tanemura
} // namespace perc
