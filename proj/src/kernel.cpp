#include "perc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace perc {

const char* family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::BooleanPower: return "boolean_power";
        case KernelFamily::MinKernel: return "min";
        case KernelFamily::MaxKernel: return "max";
        case KernelFamily::MillerAbrahams: return "miller_abrahams";
    }
    return "?";
}

// ---------------------------------------------------------------- marks

MarkDistribution MarkDistribution::dirac(double value) {
    MarkDistribution d;
    d.kind_ = Kind::Dirac;
    d.support_ = {value, value};
    return d;
}

MarkDistribution MarkDistribution::uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform mark law needs lo < hi");
    MarkDistribution d;
    d.kind_ = Kind::Uniform;
    d.support_ = {lo, hi};
    return d;
}

MarkDistribution MarkDistribution::power_law(double alpha, double a0) {
    if (alpha < 0.0 || a0 <= 0.0) throw std::invalid_argument("power law needs alpha >= 0, a0 > 0");
    MarkDistribution d;
    d.kind_ = Kind::PowerLaw;
    d.support_ = {0.0, a0};
    d.alpha_ = alpha;
    return d;
}

MarkDistribution MarkDistribution::finite_discrete(std::vector<double> values,
                                                   std::vector<double> weights) {
    if (values.empty() || values.size() != weights.size())
        throw std::invalid_argument("finite discrete law needs matching nonempty values/weights");
    MarkDistribution d;
    d.kind_ = Kind::FiniteDiscrete;
    double tot = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("negative weight");
        tot += w;
    }
    if (tot <= 0.0) throw std::invalid_argument("weights sum to zero");
    // sort by value so mass() is a prefix sum
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double cum = 0.0;
    for (std::size_t i : idx) {
        d.values_.push_back(values[i]);
        cum += weights[i] / tot;
        d.cum_weights_.push_back(cum);
    }
    d.cum_weights_.back() = 1.0;
    d.support_ = {d.values_.front(), d.values_.back()};
    return d;
}

double MarkDistribution::sample(RngStream& rng) const {
    switch (kind_) {
        case Kind::Dirac:
            return support_.lo;
        case Kind::Uniform:
            return rng.uniform(support_.lo, support_.hi);
        case Kind::PowerLaw:
            // CDF (E/a0)^(alpha+1), inverted
            return support_.hi * std::pow(rng.uniform01(), 1.0 / (alpha_ + 1.0));
        case Kind::FiniteDiscrete: {
            double u = rng.uniform01();
            auto it = std::lower_bound(cum_weights_.begin(), cum_weights_.end(), u);
            std::size_t i = static_cast<std::size_t>(it - cum_weights_.begin());
            if (i >= values_.size()) i = values_.size() - 1;
            return values_[i];
        }
    }
    return support_.lo;
}

double MarkDistribution::mass(double lo, double hi) const {
    if (hi < lo) return 0.0;
    switch (kind_) {
        case Kind::Dirac:
            return (support_.lo >= lo && support_.lo <= hi) ? 1.0 : 0.0;
        case Kind::Uniform: {
            double a = std::max(lo, support_.lo), b = std::min(hi, support_.hi);
            return b > a ? (b - a) / support_.width() : 0.0;
        }
        case Kind::PowerLaw: {
            double a = std::max(lo, 0.0), b = std::min(hi, support_.hi);
            if (b <= a) return 0.0;
            double p = alpha_ + 1.0, a0 = support_.hi;
            return std::pow(b / a0, p) - std::pow(a / a0, p);
        }
        case Kind::FiniteDiscrete: {
            double m = 0.0, prev = 0.0;
            for (std::size_t i = 0; i < values_.size(); ++i) {
                if (values_[i] >= lo && values_[i] <= hi) m += cum_weights_[i] - prev;
                prev = cum_weights_[i];
            }
            return m;
        }
    }
    return 0.0;
}

double MarkDistribution::mean() const {
    switch (kind_) {
        case Kind::Dirac: return support_.lo;
        case Kind::Uniform: return 0.5 * (support_.lo + support_.hi);
        case Kind::PowerLaw: return support_.hi * (alpha_ + 1.0) / (alpha_ + 2.0);
        case Kind::FiniteDiscrete: {
            double m = 0.0, prev = 0.0;
            for (std::size_t i = 0; i < values_.size(); ++i) {
                m += values_[i] * (cum_weights_[i] - prev);
                prev = cum_weights_[i];
            }
            return m;
        }
    }
    return 0.0;
}

// --------------------------------------------------------------- kernels

static void check_support(Interval s) {
    if (!(s.lo <= s.hi)) throw std::invalid_argument("kernel support needs lo <= hi");
}

KernelSpec KernelSpec::boolean_power(double gamma, Interval support) {
    check_support(support);
    if (gamma <= 0.0) throw std::invalid_argument("boolean power kernel needs gamma > 0");
    if (support.lo < 0.0) throw std::invalid_argument("boolean power kernel needs nonnegative marks");
    KernelSpec k;
    k.family_ = KernelFamily::BooleanPower;
    k.direction_ = Direction::Increasing;
    k.support_ = support;
    k.gamma_ = gamma;
    return k;
}

KernelSpec KernelSpec::min_kernel(Interval support) {
    check_support(support);
    KernelSpec k;
    k.family_ = KernelFamily::MinKernel;
    k.direction_ = Direction::Increasing;
    k.support_ = support;
    return k;
}

KernelSpec KernelSpec::max_kernel(Interval support) {
    check_support(support);
    KernelSpec k;
    k.family_ = KernelFamily::MaxKernel;
    k.direction_ = Direction::Increasing;
    k.support_ = support;
    return k;
}

KernelSpec KernelSpec::miller_abrahams(double zeta, Interval support) {
    check_support(support);
    if (zeta <= 0.0) throw std::invalid_argument("miller-abrahams kernel needs zeta > 0");
    if (support.lo < 0.0 && support.hi > 0.0)
        throw std::invalid_argument(
            "miller-abrahams marks must have support within [0,inf) or (-inf,0]: "
            "with mixed signs the kernel is not monotone and the FKG inequality can fail");
    KernelSpec k;
    k.family_ = KernelFamily::MillerAbrahams;
    // decreasing on nonnegative marks, increasing on nonpositive ones
    k.direction_ = support.hi <= 0.0 && support.lo < 0.0 ? Direction::Increasing : Direction::Decreasing;
    k.support_ = support;
    k.zeta_ = zeta;
    return k;
}

void KernelSpec::require_in_support(double a) const {
    if (!support_.contains(a)) throw std::domain_error("mark outside kernel support");
}

double KernelSpec::eval(double a, double b) const {
    require_in_support(a);
    require_in_support(b);
    switch (family_) {
        case KernelFamily::BooleanPower: return std::pow(a + b, gamma_);
        case KernelFamily::MinKernel: return std::min(a, b);
        case KernelFamily::MaxKernel: return std::max(a, b);
        case KernelFamily::MillerAbrahams:
            return zeta_ - (std::fabs(a) + std::fabs(b) + std::fabs(a - b));
    }
    return 0.0;
}

double KernelSpec::h_star(double a) const {
    require_in_support(a);
    switch (family_) {
        case KernelFamily::BooleanPower: return std::pow(a + support_.hi, gamma_);
        case KernelFamily::MinKernel: return a;            // best partner b = hi
        case KernelFamily::MaxKernel: return support_.hi;  // sup attained at hi
        case KernelFamily::MillerAbrahams:
            // same-sign support: h = zeta - 2 max(|a|,|b|); the best partner
            // minimizes |b|
            if (support_.lo >= 0.0) return zeta_ - 2.0 * std::max(a, support_.lo);
            return zeta_ - 2.0 * std::max(std::fabs(a), std::fabs(support_.hi));
    }
    return 0.0;
}

double KernelSpec::sup() const {
    switch (family_) {
        case KernelFamily::BooleanPower: return std::pow(2.0 * support_.hi, gamma_);
        case KernelFamily::MinKernel: return support_.hi;
        case KernelFamily::MaxKernel: return support_.hi;
        case KernelFamily::MillerAbrahams:
            if (support_.lo >= 0.0) return zeta_ - 2.0 * support_.lo;
            return zeta_ - 2.0 * std::fabs(support_.hi);
    }
    return 0.0;
}

double KernelSpec::eval_norm(double a, double b) const { return eval(a, b) / scale_; }

KernelSpec KernelSpec::normalized() const {
    double s = sup();
    if (!(s > 0.0) || !std::isfinite(s))
        throw std::invalid_argument("trivial kernel: sup h <= 0 over the support, graph would have no edges");
    KernelSpec k = *this;
    k.scale_ = s;
    k.normalized_ = true;
    return k;
}

Interval KernelSpec::u_star(double delta) const {
    if (!(delta > 0.0)) throw std::invalid_argument("u_star needs delta > 0");
    const double w = support_.width();
    const double d = delta * scale_; // condition in raw kernel units
    double eta = 0.0;
    switch (family_) {
        case KernelFamily::BooleanPower: {
            // worst partner is hi for gamma >= 1 (differences grow with b),
            // lo for gamma < 1
            double bstar = gamma_ >= 1.0 ? support_.hi : support_.lo;
            double top = std::pow(support_.hi + bstar, gamma_);
            if (top <= d) {
                eta = w;
            } else {
                eta = (support_.hi + bstar) - std::pow(top - d, 1.0 / gamma_);
            }
            break;
        }
        case KernelFamily::MinKernel:
        case KernelFamily::MaxKernel:
            eta = d;
            break;
        case KernelFamily::MillerAbrahams:
            eta = d / 2.0;
            break;
    }
    eta = std::clamp(eta, 0.0, w);
    if (direction_ == Direction::Increasing) return {support_.hi - eta, support_.hi};
    return {support_.lo, support_.lo + eta};
}

Interval KernelSpec::u_star_checked(double delta, const MarkDistribution& dist) const {
    Interval u = u_star(delta);
    if (dist.mass(u.lo, u.hi) <= 0.0)
        throw std::invalid_argument("u_star slice has zero mark-law mass; "
                                    "the high-connectivity mark assumption fails for this configuration");
    return u;
}

} // namespace perc
