#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "perc/crossings.hpp"
#include "perc/kernel.hpp"
#include "perc/renorm.hpp"
#include "perc/rng.hpp"

namespace perc {
namespace tanemura {

struct Pt {
    int x = 0, y = 0;
    friend bool operator==(const Pt&, const Pt&) = default;
    friend auto operator<=>(const Pt&, const Pt&) = default;
};

// Total order on the outer boundary of a connected string of points in Z^2,
// produced from the grouped quarter-turn rule. Returns the boundary in
// increasing order; the construction picks the last element.
std::vector<Pt> boundary_order(const std::vector<Pt>& string);

struct OracleQuery {
    int s = 0;        // row index
    int j = 0;        // the candidate becomes x^s_j
    Pt candidate{};   // the point being probed
    int attach = 0;   // label k of the attach point x^s_k; 0 for the initial probe
    Pt attach_point{}; // coordinates of x^s_k (meaningful when attach > 0)
};

class OccupancyOracle {
public:
    virtual ~OccupancyOracle() = default;
    // is `candidate` occupied (attach == 0) or occupied and linked to x^s_k?
    virtual bool occupied_and_linked(const OracleQuery& q) = 0;
};

class BernoulliOracle final : public OccupancyOracle {
public:
    BernoulliOracle(double p, RngStream rng) : p_(p), rng_(rng) {}
    bool occupied_and_linked(const OracleQuery&) override { return rng_.bernoulli(p_); }

private:
    double p_;
    RngStream rng_;
};

// Scripted replay: one line per query `s j x y k answer`. Queries must match
// the script exactly, in order; a mismatch throws.
class ScriptedOracle final : public OccupancyOracle {
public:
    struct Line {
        OracleQuery q;
        bool answer = false;
    };
    explicit ScriptedOracle(std::vector<Line> lines) : lines_(std::move(lines)) {}
    static ScriptedOracle parse(std::istream& is);
    bool occupied_and_linked(const OracleQuery& q) override;
    bool exhausted() const { return next_ == lines_.size(); }

private:
    std::vector<Line> lines_;
    std::size_t next_ = 0;
};

void write_script(std::ostream& os, const std::vector<ScriptedOracle::Line>& lines);

// per-row trace: enough to reconstruct C^s_j for every j
struct RowTrace {
    Pt start{};
    bool start_occupied = false;
    struct Addition {
        Pt point{};
        bool occupied = false; // joined E (true) or F (false)
        int attach = 0;
    };
    std::vector<Addition> additions;
    int stop_j = 0; // J^s; 0 while the row ran to completion
    bool crossed = false;

    std::vector<Pt> e_set(int upto_j) const; // E^s_j
    std::vector<Pt> f_set(int upto_j) const; // F^s_j
};

struct TanemuraResult {
    int m = 0;                       // box parameter M
    std::vector<std::uint8_t> zeta;  // (M+2) x M grid, row-major by y
    int crossings = 0;               // N_M
    std::vector<RowTrace> rows;

    bool zeta_at(int x, int y) const { return zeta[static_cast<std::size_t>(y) * (m + 2) + x] != 0; }
};

// Runs the full construction schedule on Lambda = [0,M+1] x [0,M-1].
TanemuraResult run_tanemura(int M, OccupancyOracle& oracle);

// Independent recount: maximal vertex-disjoint LR crossings of the occupied
// sites under nearest-neighbor adjacency, via the max-flow module.
int count_crossings_of_zeta(const TanemuraResult& r);

// zeta dump: M rows of M+2 binary digits, top row y = M-1
void dump_zeta(std::ostream& os, const TanemuraResult& r);

// Oracle backed by the renormalization machinery: occupation of a start is
// the occupied-origin event at the renormalized anchor (starts are
// pre-seeded, realizing the conditioned law), and a link probe runs the
// four-step extension chain toward the neighbour. Demo quality: the chain
// is evaluated per query without any probability certification.
class RenormOracle final : public OccupancyOracle {
public:
    RenormOracle(const KernelSpec& kernel, const MarkDistribution& dist,
                 const RenormParams& params, int m, int n, int M, std::uint64_t seed);
    bool occupied_and_linked(const OracleQuery& q) override;
    const LatticeField& field() const { return field_; }

private:
    struct NodeState {
        bool occupied = false;
        bool evaluated = false;
        std::array<Site, 4> face_anchor{}; // towards +e1, +e2, -e1, -e2
        std::array<bool, 4> face_ready{};
    };
    Site renorm_site(Pt p) const;
    int next_layer();

    KernelSpec kernel_;
    RenormParams params_;
    int m_, n_, M_;
    long long cell_; // 4N in site units
    LatticeField field_;
    std::vector<NodeState> nodes_; // indexed by row-major Lambda position
    std::vector<std::unique_ptr<ClusterState>> clusters_;
    std::vector<int> cluster_of_;  // node -> cluster id, -1 none
    int layer_cursor_ = 0;
};

} // namespace tanemura
} // namespace perc
