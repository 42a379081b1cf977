#pragma once

#include <functional>
#include <vector>

namespace rsrl {

struct NelderMeadOptions {
    int max_evaluations = 4000;
    /// Stop when the spread of simplex values is below this.
    double f_tolerance = 1e-9;
    /// ... and the simplex diameter (sup-norm) is below this.
    double x_tolerance = 1e-7;
    double initial_step = 0.5;
    /// Rebuild the simplex around the best point this many times after convergence.
    int restarts = 1;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value;
    int iterations;
    int evaluations;
    bool converged;
};

/// Minimizes f. Non-finite values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, const NelderMeadOptions& opt = {});

/// Radical-inverse Halton point `index` (>= 1) in (0, 1)^dim; dim <= 16.
std::vector<double> halton_point(int index, int dim);

} // namespace rsrl
