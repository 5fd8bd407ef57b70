#include "perc/crossings.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace perc {

RegionTag CrossingSpec::classify(const double* x) const {
    auto transverse_ok = [&](int from) {
        for (int i = from; i < d; ++i) {
            if (variant == Variant::Slice && i >= 2) {
                if (!(x[i] >= -k && x[i] < k)) return false; // half-open slice
            } else {
                if (!(x[i] >= -L && x[i] <= L)) return false;
            }
        }
        return true;
    };
    const double x1lim = variant == Variant::Continuum ? L : L + 2.0;
    if (x[0] >= -x1lim && x[0] <= x1lim && transverse_ok(1)) return RegionTag::Interior;
    if (x[0] < -x1lim && transverse_ok(1)) return RegionTag::Source;
    if (x[0] > x1lim && transverse_ok(1)) return RegionTag::Sink;
    return RegionTag::Outside;
}

std::vector<RegionTag> classify_vertices(const GeometricGraph& g, const CrossingSpec& spec) {
    if (g.d != spec.d) throw std::invalid_argument("crossing spec dimension mismatch");
    std::vector<RegionTag> tags(g.size());
    for (int i = 0; i < g.size(); ++i) tags[i] = spec.classify(g.point(i));
    return tags;
}

namespace {

// Dinic max-flow. Vertex-disjointness is enforced by splitting every
// eligible vertex into in/out nodes joined by a unit arc; all other arcs are
// effectively infinite, so the min cut is a genuine vertex cut.
struct Dinic {
    struct Arc {
        int to, cap;
    };
    std::vector<Arc> arcs;
    std::vector<std::vector<int>> head;
    std::vector<int> level, iter;

    explicit Dinic(int n) : head(n), level(n), iter(n) {}

    void add(int u, int v, int cap) {
        head[u].push_back(static_cast<int>(arcs.size()));
        arcs.push_back({v, cap});
        head[v].push_back(static_cast<int>(arcs.size()));
        arcs.push_back({u, 0});
    }

    bool bfs(int s, int t) {
        std::fill(level.begin(), level.end(), -1);
        std::queue<int> q;
        level[s] = 0;
        q.push(s);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int id : head[u]) {
                const Arc& a = arcs[id];
                if (a.cap > 0 && level[a.to] < 0) {
                    level[a.to] = level[u] + 1;
                    q.push(a.to);
                }
            }
        }
        return level[t] >= 0;
    }

    int dfs(int u, int t, int f) {
        if (u == t) return f;
        for (int& i = iter[u]; i < static_cast<int>(head[u].size()); ++i) {
            int id = head[u][i];
            Arc& a = arcs[id];
            if (a.cap > 0 && level[a.to] == level[u] + 1) {
                int got = dfs(a.to, t, std::min(f, a.cap));
                if (got > 0) {
                    a.cap -= got;
                    arcs[id ^ 1].cap += got;
                    return got;
                }
            }
        }
        return 0;
    }

    int run(int s, int t) {
        int flow = 0;
        while (bfs(s, t)) {
            std::fill(iter.begin(), iter.end(), 0);
            int f;
            while ((f = dfs(s, t, 1 << 29)) > 0) flow += f;
        }
        return flow;
    }
};

} // namespace

CrossingResult max_disjoint_paths(const std::vector<std::vector<int>>& adj,
                                  const std::vector<RegionTag>& tags) {
    const int n = static_cast<int>(adj.size());
    const int INF = 1 << 29;
    auto in_node = [](int v) { return 2 * v; };
    auto out_node = [](int v) { return 2 * v + 1; };
    const int S = 2 * n, T = 2 * n + 1;
    Dinic net(2 * n + 2);

    auto eligible = [&](int v) { return tags[v] != RegionTag::Outside; };
    for (int v = 0; v < n; ++v) {
        if (!eligible(v)) continue;
        net.add(in_node(v), out_node(v), 1);
        if (tags[v] == RegionTag::Source) net.add(S, in_node(v), INF);
        if (tags[v] == RegionTag::Sink) net.add(out_node(v), T, INF);
    }
    auto forward_ok = [&](int u, int v) {
        // a crossing is source, interiors, sink in that order
        return (tags[u] == RegionTag::Source || tags[u] == RegionTag::Interior) &&
               (tags[v] == RegionTag::Interior || tags[v] == RegionTag::Sink);
    };
    for (int u = 0; u < n; ++u) {
        if (!eligible(u)) continue;
        for (int v : adj[u]) {
            if (v <= u || !eligible(v)) continue;
            if (forward_ok(u, v)) net.add(out_node(u), in_node(v), INF);
            if (forward_ok(v, u)) net.add(out_node(v), in_node(u), INF);
        }
    }

    CrossingResult res;
    res.count = net.run(S, T);

    // independent Menger check: the residual-reachable frontier crosses only
    // saturated vertex arcs
    {
        std::vector<char> reach(2 * n + 2, 0);
        std::queue<int> q;
        reach[S] = 1;
        q.push(S);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int id : net.head[u]) {
                const auto& a = net.arcs[id];
                if (a.cap > 0 && !reach[a.to]) {
                    reach[a.to] = 1;
                    q.push(a.to);
                }
            }
        }
        int cut = 0;
        for (int v = 0; v < n; ++v)
            if (eligible(v) && reach[in_node(v)] && !reach[out_node(v)]) ++cut;
        res.min_cut_size = cut;
    }

    // witness decomposition, lowest-index tie break; reverse caps hold the
    // pushed flow since every forward arc was added with reverse cap 0
    std::vector<std::vector<std::pair<int, int>>> flow_out(2 * n + 2); // (to, arc id)
    for (std::size_t u = 0; u < net.head.size(); ++u)
        for (int id : net.head[u])
            if ((id & 1) == 0 && net.arcs[id ^ 1].cap > 0)
                flow_out[u].emplace_back(net.arcs[id].to, id);
    for (auto& v : flow_out) {
        std::sort(v.begin(), v.end());
        std::reverse(v.begin(), v.end()); // back() is the smallest head index
    }
    auto take = [&](int u) -> int {
        auto& out = flow_out[u];
        while (!out.empty()) {
            int id = out.back().second;
            if (net.arcs[id ^ 1].cap > 0) {
                net.arcs[id ^ 1].cap -= 1;
                return id;
            }
            out.pop_back();
        }
        return -1;
    };
    for (int i = 0; i < res.count; ++i) {
        std::vector<int> path;
        int u = S;
        while (u != T) {
            if (u < 2 * n && (u & 1) == 0) path.push_back(u / 2);
            int id = take(u);
            if (id < 0) throw std::logic_error("flow decomposition failed");
            u = net.arcs[id].to;
        }
        res.witnesses.push_back(std::move(path));
    }
    return res;
}

CrossingResult max_disjoint_crossings(const GeometricGraph& g, const CrossingSpec& spec) {
    return max_disjoint_paths(g.adj, classify_vertices(g, spec));
}

bool crossing_scaling_statistic(const CrossingResult& r, const CrossingSpec& spec, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("scaling statistic needs c > 0");
    const double threshold = spec.variant == CrossingSpec::Variant::Slice
                                 ? c * spec.L
                                 : c * std::pow(spec.L, spec.d - 1);
    return static_cast<double>(r.count) >= threshold;
}

void verify_witnesses(const CrossingResult& r, const std::vector<std::vector<int>>& adj,
                      const std::vector<RegionTag>& tags) {
    if (r.count != static_cast<int>(r.witnesses.size()))
        throw std::logic_error("count != number of witnesses");
    if (r.count != r.min_cut_size) throw std::logic_error("count != min cut size");
    std::vector<char> used(adj.size(), 0);
    for (const auto& w : r.witnesses) {
        if (w.size() < 2) throw std::logic_error("witness too short");
        if (tags[w.front()] != RegionTag::Source) throw std::logic_error("witness does not start in source region");
        if (tags[w.back()] != RegionTag::Sink) throw std::logic_error("witness does not end in sink region");
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            if (i > 0 && tags[w[i]] != RegionTag::Interior)
                throw std::logic_error("witness interior vertex not inside the box");
            const auto& a = adj[w[i]];
            if (!std::binary_search(a.begin(), a.end(), w[i + 1]))
                throw std::logic_error("witness uses a non-edge");
        }
        for (int v : w) {
            if (used[v]) throw std::logic_error("witnesses share a vertex");
            used[v] = 1;
        }
    }
}

} // namespace perc
