#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rsrl/errors.hpp"

namespace rsrl {

class UtilityFunction;

namespace utility {

/// u(x) = x
struct Linear {};

/// u(x) = sign(lambda) * exp(lambda * x). With x0 = sign(lambda) the shortfall
/// is the entropic map (1/lambda) log E[exp(lambda X)].
struct Entropic {
    double lambda;
};

/// u(x) = sign(lambda) * (exp(lambda * x) - 1); lambda = 1 is "e^x - 1",
/// lambda = -1 is "1 - e^-x". Zero at the origin.
struct Exponential {
    double lambda;
};

/// Slope (1 - kappa) on gains, (1 + kappa) on losses and zero.
struct PiecewiseLinear {
    double kappa;
};

/// k+ (x + s)^l+ - k+ s^l+ for x >= 0 and -k- (s - x)^l- + k- s^l- for x < 0,
/// where s is the shift (0 for the plain polynomial).
struct PolynomialMixed {
    double k_plus;
    double l_plus;
    double k_minus;
    double l_minus;
    double shift = 0.0;
};

/// Inner utility on [lower, upper], affine with the given slope outside.
struct Truncated {
    std::shared_ptr<const UtilityFunction> inner;
    double lower;
    double upper;
    double slope;
    double value_at_lower;
    double value_at_upper;
};

/// Inner utility replaced by its chord through the origin on [0, phi), and
/// on (-phi, 0) too when `mirror` is set.
struct LinearizedNearZero {
    std::shared_ptr<const UtilityFunction> inner;
    double phi;
    bool mirror;
    double value_at_zero;
    double value_at_phi;
    double value_at_minus_phi;
};

} // namespace utility

/// Continuous, strictly increasing scalar utility. Immutable value type;
/// composite families share their inner utility.
class UtilityFunction {
public:
    using Family = std::variant<utility::Linear, utility::Entropic, utility::Exponential,
                                utility::PiecewiseLinear, utility::PolynomialMixed,
                                utility::Truncated, utility::LinearizedNearZero>;

    static UtilityFunction linear();
    static UtilityFunction entropic(double lambda);
    static UtilityFunction exponential(double lambda);
    static UtilityFunction piecewise_linear(double kappa);
    static UtilityFunction polynomial_mixed(double k_plus, double l_plus, double k_minus,
                                            double l_minus, double shift = 0.0);
    static UtilityFunction truncated(const UtilityFunction& inner, double lower, double upper,
                                     double slope);
    static UtilityFunction linearized_near_zero(const UtilityFunction& inner, double phi);

    /// Throws DomainError for non-finite x.
    double operator()(double x) const;

    const Family& family() const noexcept { return family_; }
    std::string_view family_name() const noexcept;

    template <class T>
    bool holds() const noexcept {
        return std::holds_alternative<T>(family_);
    }

private:
    explicit UtilityFunction(Family family) : family_(std::move(family)) {}
    double eval(double x) const noexcept;

    Family family_;
};

inline double eval_utility(const UtilityFunction& u, double x) { return u(x); }

/// Solves u(y) = level by bisection. Throws NumericError if no bracket is
/// found within 60 doublings (level outside the range of u).
double inverse_utility(const UtilityFunction& u, double level);

struct SlopeBounds {
    double lower;  ///< epsilon
    double upper;  ///< L
    double a;
    double b;
    /// Set when lower <= 0, L is not finite, or grid refinement shows the
    /// extremal slopes drifting (a zero or unbounded derivative inside [a, b]).
    bool violation;
};

/// Extremal divided differences of u over a uniform grid of `grid_n` points.
SlopeBounds slope_bounds(const UtilityFunction& u, double a, double b, int grid_n);

struct Outcome {
    double value;
    double probability;
};

/// Finite-support random outcome {X(i), mu(i)}.
class FiniteDistribution {
public:
    /// Probabilities must be nonnegative and sum to 1 within 1e-9; they are
    /// renormalized so the stored sum is 1 to rounding.
    explicit FiniteDistribution(std::vector<Outcome> outcomes);

    static FiniteDistribution point_mass(double value);
    static FiniteDistribution two_point(double high, double low, double p_high);

    std::span<const Outcome> outcomes() const noexcept { return outcomes_; }
    std::size_t size() const noexcept { return outcomes_.size(); }

    /// Extremes over the support (outcomes with positive probability).
    double min() const noexcept { return min_; }
    double max() const noexcept { return max_; }
    double mean() const noexcept;
    double variance() const noexcept;

    FiniteDistribution shifted(double c) const;

private:
    std::vector<Outcome> outcomes_;
    double min_ = 0.0;
    double max_ = 0.0;
};

inline constexpr double kDefaultShortfallTol = 1e-10;

/// Utility-based shortfall rho(X) = sup{m : E[u(X - m)] >= x0} with the
/// reference root y0 = u^{-1}(x0) cached.
class Shortfall {
public:
    Shortfall(UtilityFunction utility, double acceptance_level);

    const UtilityFunction& utility() const noexcept { return utility_; }
    double acceptance_level() const noexcept { return x0_; }
    double reference_root() const noexcept { return y0_; }

private:
    UtilityFunction utility_;
    double x0_;
    double y0_;
};

/// E[u(X - m)] over the given outcomes.
double expected_utility(std::span<const Outcome> outcomes, const UtilityFunction& u, double m);

/// Root m* of E[u(X - m)] = x0, bracketed to width <= tol. tol = 0 runs the
/// bisection to full double precision.
double shortfall_value(const FiniteDistribution& x, const Shortfall& s,
                       double tol = kDefaultShortfallTol);

/// Same as above on raw outcomes. Probabilities are trusted as given.
double shortfall_value(std::span<const Outcome> outcomes, const Shortfall& s,
                       double tol = kDefaultShortfallTol);

/// rho(X) - rho(0) = shortfall_value(X) + y0. Lies in [min X, max X].
double centralized_value(const FiniteDistribution& x, const Shortfall& s,
                         double tol = kDefaultShortfallTol);

/// w(p) = (rho~(X) - x2) / (x1 - x2) for the gamble {x1 w.p. p, x2 otherwise}.
double subjective_probability(double x1, double x2, double p, const Shortfall& s,
                              double tol = kDefaultShortfallTol);

struct TruncationWindow {
    double lower;
    double upper;
};

/// [y0 - 2 R / (1 - gamma), y0 + 2 R / (1 - gamma)]
TruncationWindow truncation_window(double y0, double reward_bound, double gamma);

/// Truncates u outside the window derived from (x0, reward_bound, gamma).
/// Without an explicit slope, the grid-estimated minimal slope of u on the
/// window is used, floored at 1e-6.
UtilityFunction truncate(const UtilityFunction& u, double x0, double reward_bound, double gamma,
                         std::optional<double> slope = std::nullopt);

enum class LinearizationScheme { Shift, Linear };

inline constexpr double kDefaultLinearizationPhi = 1e-4;

/// Removes the zero/unbounded derivative at the origin. Shift is only
/// defined for PolynomialMixed and throws UnsupportedError otherwise.
UtilityFunction linearize_near_zero(const UtilityFunction& u,
                                    double phi = kDefaultLinearizationPhi,
                                    LinearizationScheme scheme = LinearizationScheme::Linear);

} // namespace rsrl
