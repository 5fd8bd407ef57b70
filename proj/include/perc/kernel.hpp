#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "perc/rng.hpp"

namespace perc {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

enum class KernelFamily { BooleanPower, MinKernel, MaxKernel, MillerAbrahams };
enum class Direction { Increasing, Decreasing };

const char* family_name(KernelFamily f);

// Distribution of the marks attached to the points (the law nu).
class MarkDistribution {
public:
    enum class Kind { Dirac, Uniform, PowerLaw, FiniteDiscrete };

    static MarkDistribution dirac(double value);
    static MarkDistribution uniform(double lo, double hi);
    // density proportional to E^alpha on [0, a0]
    static MarkDistribution power_law(double alpha, double a0);
    static MarkDistribution finite_discrete(std::vector<double> values, std::vector<double> weights);

    Kind kind() const { return kind_; }
    Interval support() const { return support_; }
    double sample(RngStream& rng) const;
    // probability mass of [lo, hi] (closed interval)
    double mass(double lo, double hi) const;
    double mean() const;

private:
    Kind kind_ = Kind::Dirac;
    Interval support_{};
    double alpha_ = 0.0; // PowerLaw exponent
    std::vector<double> values_;
    std::vector<double> cum_weights_; // normalized cumulative
};

// A structural kernel h together with its admissible mark interval and the
// normalization making sup h = 1 over support x support. All geometric
// modules consume the normalized (working) kernel, whose edge lengths are
// bounded by 1.
class KernelSpec {
public:
    static KernelSpec boolean_power(double gamma, Interval support);
    static KernelSpec min_kernel(Interval support);
    static KernelSpec max_kernel(Interval support);
    // rejects supports straddling 0: monotonicity (and with it the FKG
    // machinery downstream) fails for mixed-sign Miller-Abrahams marks
    static KernelSpec miller_abrahams(double zeta, Interval support);

    KernelFamily family() const { return family_; }
    Direction direction() const { return direction_; }
    Interval support() const { return support_; }
    double gamma() const { return gamma_; }
    double zeta() const { return zeta_; }
    double normalization_scale() const { return scale_; }
    bool is_normalized() const { return normalized_; }

    // raw kernel value h(a,b)
    double eval(double a, double b) const;
    // sup_b h(a,b) over the support, closed form
    double h_star(double a) const;
    // kernel sup over support^2, closed form
    double sup() const;

    // working kernel h/scale and its sup-profile
    double eval_norm(double a, double b) const;
    double h_star_norm(double a) const { return h_star(a) / scale_; }

    // Returns the spec with normalization_scale = sup so the working kernel
    // has sup exactly 1. Throws if the sup is not positive (no edges).
    KernelSpec normalized() const;

    // Largest boundary slice [hi-eta, hi] (Increasing) or [lo, lo+eta]
    // (Decreasing) such that eval_norm(a,b) >= h_star_norm(b) - delta for
    // every a in the slice and b in the support.
    Interval u_star(double delta) const;
    // Same, but additionally requires positive nu-mass of the slice.
    Interval u_star_checked(double delta, const MarkDistribution& dist) const;

    void require_in_support(double a) const;

private:
    KernelFamily family_ = KernelFamily::MaxKernel;
    Direction direction_ = Direction::Increasing;
    Interval support_{};
    double gamma_ = 1.0;
    double zeta_ = 1.0;
    double scale_ = 1.0;
    bool normalized_ = false;
};

} // namespace perc
