#include "rsrl/valuation.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>

namespace rsrl {

namespace {

constexpr int kMaxBracketDoublings = 60;

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

// Brackets and bisects a decreasing function f for sup{m : f(m) >= 0}.
// Starts from [lo, hi] and widens geometrically until f(lo) >= 0 > f(hi).
template <class F>
double bisect_decreasing(F&& f, double lo, double hi, double tol, const char* what) {
    auto checked = [&](double m) {
        const double v = f(m);
        if (std::isnan(v)) throw NumericError(std::string(what) + ": NaN while bracketing");
        return v;
    };

    double width = std::max(1.0, hi - lo);
    for (int k = 0; checked(lo) < 0.0; ++k) {
        if (k == kMaxBracketDoublings)
            throw NumericError(std::string(what) + ": no lower bracket after 60 doublings");
        lo -= width;
        width *= 2.0;
    }
    width = std::max(1.0, hi - lo);
    for (int k = 0; checked(hi) >= 0.0; ++k) {
        if (k == kMaxBracketDoublings)
            throw NumericError(std::string(what) + ": no upper bracket after 60 doublings");
        hi += width;
        width *= 2.0;
    }

    for (;;) {
        const double mid = lo + 0.5 * (hi - lo);
        const double resolution = 4.0 * DBL_EPSILON * std::max(std::abs(lo), std::abs(hi));
        if (hi - lo <= tol || hi - lo <= resolution || mid <= lo || mid >= hi) return mid;
        const double v = checked(mid);
        if (v == 0.0) return mid;
        if (v > 0.0)
            lo = mid;
        else
            hi = mid;
    }
}

bool is_polynomial(const UtilityFunction& u) { return u.holds<utility::PolynomialMixed>(); }

} // namespace

// ---------------------------------------------------------------------------
// UtilityFunction

UtilityFunction UtilityFunction::linear() { return UtilityFunction(utility::Linear{}); }

UtilityFunction UtilityFunction::entropic(double lambda) {
    require(std::isfinite(lambda) && lambda != 0.0, "entropic utility requires finite lambda != 0");
    return UtilityFunction(utility::Entropic{lambda});
}

UtilityFunction UtilityFunction::exponential(double lambda) {
    require(std::isfinite(lambda) && lambda != 0.0,
            "exponential utility requires finite lambda != 0");
    return UtilityFunction(utility::Exponential{lambda});
}

UtilityFunction UtilityFunction::piecewise_linear(double kappa) {
    require(kappa > -1.0 && kappa < 1.0, "piecewise-linear utility requires kappa in (-1, 1)");
    return UtilityFunction(utility::PiecewiseLinear{kappa});
}

UtilityFunction UtilityFunction::polynomial_mixed(double k_plus, double l_plus, double k_minus,
                                                  double l_minus, double shift) {
    require(k_plus > 0.0 && l_plus > 0.0 && k_minus > 0.0 && l_minus > 0.0 &&
                std::isfinite(k_plus) && std::isfinite(l_plus) && std::isfinite(k_minus) &&
                std::isfinite(l_minus),
            "polynomial utility requires finite k+, l+, k-, l- > 0");
    require(shift >= 0.0 && std::isfinite(shift), "polynomial shift must be >= 0");
    return UtilityFunction(utility::PolynomialMixed{k_plus, l_plus, k_minus, l_minus, shift});
}

UtilityFunction UtilityFunction::truncated(const UtilityFunction& inner, double lower,
                                           double upper, double slope) {
    require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
            "truncation requires finite lower < upper");
    require(slope > 0.0 && std::isfinite(slope), "truncation slope must be > 0");
    auto shared = std::make_shared<const UtilityFunction>(inner);
    return UtilityFunction(
        utility::Truncated{shared, lower, upper, slope, inner(lower), inner(upper)});
}

UtilityFunction UtilityFunction::linearized_near_zero(const UtilityFunction& inner, double phi) {
    require(phi > 0.0 && std::isfinite(phi), "linearization requires phi > 0");
    auto shared = std::make_shared<const UtilityFunction>(inner);
    return UtilityFunction(utility::LinearizedNearZero{shared, phi, is_polynomial(inner),
                                                       inner(0.0), inner(phi), inner(-phi)});
}

double UtilityFunction::operator()(double x) const {
    if (!std::isfinite(x)) throw DomainError("utility evaluated at non-finite x");
    return eval(x);
}

double UtilityFunction::eval(double x) const noexcept {
    struct Visitor {
        double x;
        double operator()(const utility::Linear&) const { return x; }
        double operator()(const utility::Entropic& f) const {
            return sign_of(f.lambda) * std::exp(f.lambda * x);
        }
        double operator()(const utility::Exponential& f) const {
            return sign_of(f.lambda) * std::expm1(f.lambda * x);
        }
        double operator()(const utility::PiecewiseLinear& f) const {
            return x > 0.0 ? (1.0 - f.kappa) * x : (1.0 + f.kappa) * x;
        }
        double operator()(const utility::PolynomialMixed& f) const {
            if (f.shift == 0.0) {
                return x >= 0.0 ? f.k_plus * std::pow(x, f.l_plus)
                                : -f.k_minus * std::pow(-x, f.l_minus);
            }
            if (x >= 0.0)
                return f.k_plus * (std::pow(x + f.shift, f.l_plus) - std::pow(f.shift, f.l_plus));
            return -f.k_minus * (std::pow(f.shift - x, f.l_minus) - std::pow(f.shift, f.l_minus));
        }
        double operator()(const utility::Truncated& f) const {
            if (x < f.lower) return f.value_at_lower + f.slope * (x - f.lower);
            if (x > f.upper) return f.value_at_upper + f.slope * (x - f.upper);
            return f.inner->eval(x);
        }
        double operator()(const utility::LinearizedNearZero& f) const {
            if (x >= 0.0 && x < f.phi)
                return f.value_at_zero + x * (f.value_at_phi - f.value_at_zero) / f.phi;
            if (f.mirror && x < 0.0 && x > -f.phi)
                return f.value_at_zero + x * (f.value_at_zero - f.value_at_minus_phi) / f.phi;
            return f.inner->eval(x);
        }
    };
    return std::visit(Visitor{x}, family_);
}

std::string_view UtilityFunction::family_name() const noexcept {
    struct Visitor {
        std::string_view operator()(const utility::Linear&) const { return "linear"; }
        std::string_view operator()(const utility::Entropic&) const { return "entropic"; }
        std::string_view operator()(const utility::Exponential&) const { return "exponential"; }
        std::string_view operator()(const utility::PiecewiseLinear&) const {
            return "piecewise_linear";
        }
        std::string_view operator()(const utility::PolynomialMixed&) const {
            return "polynomial_mixed";
        }
        std::string_view operator()(const utility::Truncated&) const { return "truncated"; }
        std::string_view operator()(const utility::LinearizedNearZero&) const {
            return "linearized_near_zero";
        }
    };
    return std::visit(Visitor{}, family_);
}

double inverse_utility(const UtilityFunction& u, double level) {
    if (!std::isfinite(level)) throw DomainError("inverse utility at non-finite level");
    return bisect_decreasing([&](double y) { return level - u(y); }, -1.0, 1.0, 0.0,
                             "inverse utility");
}

// ---------------------------------------------------------------------------
// Slopes

namespace {

std::pair<double, double> grid_slopes(const UtilityFunction& u, double a, double b, int n) {
    const double h = (b - a) / (n - 1);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double x_prev = a;
    double u_prev = u(a);
    for (int i = 1; i < n; ++i) {
        const double x = (i == n - 1) ? b : a + i * h;
        const double ux = u(x);
        const double slope = (ux - u_prev) / (x - x_prev);
        lo = std::min(lo, slope);
        hi = std::max(hi, slope);
        x_prev = x;
        u_prev = ux;
    }
    return {lo, hi};
}

} // namespace

SlopeBounds slope_bounds(const UtilityFunction& u, double a, double b, int grid_n) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw DomainError("slope_bounds requires finite a < b");
    if (grid_n < 2) throw DomainError("slope_bounds requires grid_n >= 2");

    // Every chord slope is a convex combination of the adjacent slopes it
    // spans, so the extremes over all grid pairs are attained by neighbours.
    const auto [lo, hi] = grid_slopes(u, a, b, grid_n);
    const auto [lo_fine, hi_fine] = grid_slopes(u, a, b, 2 * grid_n - 1);

    constexpr double kDrift = 1.1;
    const bool violation = !(lo > 0.0) || !std::isfinite(hi) || !std::isfinite(hi_fine) ||
                           hi_fine > kDrift * hi || lo_fine * kDrift < lo;
    return SlopeBounds{lo, hi, a, b, violation};
}

// ---------------------------------------------------------------------------
// FiniteDistribution

FiniteDistribution::FiniteDistribution(std::vector<Outcome> outcomes)
    : outcomes_(std::move(outcomes)) {
    if (outcomes_.empty()) throw DomainError("distribution needs at least one outcome");
    double total = 0.0;
    for (const auto& o : outcomes_) {
        if (!std::isfinite(o.value)) throw DomainError("distribution outcome is not finite");
        if (!(o.probability >= 0.0) || !std::isfinite(o.probability))
            throw DomainError("distribution probability must be finite and >= 0");
        total += o.probability;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DomainError("distribution probabilities sum to " + std::to_string(total));
    min_ = std::numeric_limits<double>::infinity();
    max_ = -std::numeric_limits<double>::infinity();
    for (auto& o : outcomes_) {
        o.probability /= total;
        if (o.probability > 0.0) {
            min_ = std::min(min_, o.value);
            max_ = std::max(max_, o.value);
        }
    }
}

FiniteDistribution FiniteDistribution::point_mass(double value) {
    return FiniteDistribution({{value, 1.0}});
}

FiniteDistribution FiniteDistribution::two_point(double high, double low, double p_high) {
    if (!(p_high >= 0.0 && p_high <= 1.0)) throw DomainError("probability must lie in [0, 1]");
    return FiniteDistribution({{high, p_high}, {low, 1.0 - p_high}});
}

double FiniteDistribution::mean() const noexcept {
    double m = 0.0;
    for (const auto& o : outcomes_) m += o.value * o.probability;
    return m;
}

double FiniteDistribution::variance() const noexcept {
    const double m = mean();
    double v = 0.0;
    for (const auto& o : outcomes_) v += (o.value - m) * (o.value - m) * o.probability;
    return v;
}

FiniteDistribution FiniteDistribution::shifted(double c) const {
    auto out = outcomes_;
    for (auto& o : out) o.value += c;
    return FiniteDistribution(std::move(out));
}

// ---------------------------------------------------------------------------
// Shortfall

Shortfall::Shortfall(UtilityFunction utility, double acceptance_level)
    : utility_(std::move(utility)), x0_(acceptance_level), y0_(0.0) {
    if (!std::isfinite(x0_)) throw DomainError("acceptance level must be finite");
    try {
        y0_ = inverse_utility(utility_, x0_);
    } catch (const NumericError&) {
        throw DomainError("acceptance level " + std::to_string(x0_) +
                          " is outside the range of the " + std::string(utility_.family_name()) +
                          " utility");
    }
}

double expected_utility(std::span<const Outcome> outcomes, const UtilityFunction& u, double m) {
    double acc = 0.0;
    for (const auto& o : outcomes)
        if (o.probability > 0.0) acc += o.probability * u(o.value - m);
    return acc;
}

double shortfall_value(std::span<const Outcome> outcomes, const Shortfall& s, double tol) {
    if (outcomes.empty()) throw DomainError("shortfall of an empty distribution");
    if (!(tol >= 0.0)) throw DomainError("shortfall tolerance must be >= 0");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& o : outcomes) {
        if (o.probability > 0.0) {
            lo = std::min(lo, o.value);
            hi = std::max(hi, o.value);
        }
    }
    const double y0 = s.reference_root();
    if (lo == hi) return lo - y0;

    const auto& u = s.utility();
    const double x0 = s.acceptance_level();
    return bisect_decreasing([&](double m) { return expected_utility(outcomes, u, m) - x0; },
                             lo - y0 - 1.0, hi - y0 + 1.0, tol, "shortfall");
}

double shortfall_value(const FiniteDistribution& x, const Shortfall& s, double tol) {
    return shortfall_value(x.outcomes(), s, tol);
}

double centralized_value(const FiniteDistribution& x, const Shortfall& s, double tol) {
    return shortfall_value(x, s, tol) + s.reference_root();
}

double subjective_probability(double x1, double x2, double p, const Shortfall& s, double tol) {
    if (!(x1 > x2)) throw DomainError("subjective probability requires x1 > x2");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("subjective probability requires p in [0, 1]");
    const double value = centralized_value(FiniteDistribution::two_point(x1, x2, p), s, tol);
    return std::clamp((value - x2) / (x1 - x2), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Truncation and linearization

TruncationWindow truncation_window(double y0, double reward_bound, double gamma) {
    if (!(reward_bound >= 0.0)) throw DomainError("reward bound must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("discount must lie in [0, 1)");
    const double half = 2.0 * reward_bound / (1.0 - gamma);
    return {y0 - half, y0 + half};
}

UtilityFunction truncate(const UtilityFunction& u, double x0, double reward_bound, double gamma,
                         std::optional<double> slope) {
    const double y0 = inverse_utility(u, x0);
    const auto window = truncation_window(y0, reward_bound, gamma);
    if (!(window.lower < window.upper))
        throw DomainError("truncation window is empty (reward bound is zero)");

    double eps = 0.0;
    if (slope) {
        eps = *slope;
    } else {
        constexpr int kGrid = 1001;
        constexpr double kFloor = 1e-6;
        const double estimated = slope_bounds(u, window.lower, window.upper, kGrid).lower;
        eps = (estimated > kFloor) ? estimated : kFloor;
    }
    return UtilityFunction::truncated(u, window.lower, window.upper, eps);
}

UtilityFunction linearize_near_zero(const UtilityFunction& u, double phi,
                                    LinearizationScheme scheme) {
    if (!(phi > 0.0)) throw DomainError("linearization requires phi > 0");
    if (scheme == LinearizationScheme::Linear) return UtilityFunction::linearized_near_zero(u, phi);

    const auto* poly = std::get_if<utility::PolynomialMixed>(&u.family());
    if (poly == nullptr)
        throw UnsupportedError("shift linearization is only defined for polynomial utilities");
    return UtilityFunction::polynomial_mixed(poly->k_plus, poly->l_plus, poly->k_minus,
                                             poly->l_minus, phi);
}

} // namespace rsrl
