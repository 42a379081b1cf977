#include "rsrl/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "rsrl/errors.hpp"

namespace rsrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Simplex {
    std::vector<std::vector<double>> x;
    std::vector<double> f;
};

double safe(double v) { return std::isfinite(v) ? v : kInf; }

} // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, const NelderMeadOptions& opt) {
    const std::size_t n = start.size();
    if (n == 0) throw DomainError("nelder_mead needs at least one dimension");

    int evals = 0;
    auto eval = [&](const std::vector<double>& p) {
        ++evals;
        return safe(f(p));
    };

    NelderMeadResult out{start, eval(start), 0, 0, false};

    for (int round = 0; round <= opt.restarts && evals < opt.max_evaluations; ++round) {
        Simplex s;
        s.x.push_back(out.x);
        s.f.push_back(out.value);
        for (std::size_t i = 0; i < n; ++i) {
            auto p = out.x;
            p[i] += opt.initial_step;
            s.x.push_back(p);
            s.f.push_back(eval(p));
        }

        std::vector<std::size_t> order(n + 1);
        bool done = false;
        while (evals < opt.max_evaluations) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
            const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

            double diameter = 0.0;
            for (std::size_t k = 0; k <= n; ++k)
                for (std::size_t i = 0; i < n; ++i)
                    diameter = std::max(diameter, std::abs(s.x[k][i] - s.x[best][i]));
            const double spread = s.f[worst] - s.f[best];
            if ((std::isfinite(spread) && spread <= opt.f_tolerance && diameter <= opt.x_tolerance) ||
                diameter <= 1e-14) {
                done = true;
                break;
            }
            ++out.iterations;

            std::vector<double> centroid(n, 0.0);
            for (std::size_t k = 0; k <= n; ++k) {
                if (k == worst) continue;
                for (std::size_t i = 0; i < n; ++i) centroid[i] += s.x[k][i] / static_cast<double>(n);
            }
            auto along = [&](double t) {
                std::vector<double> p(n);
                for (std::size_t i = 0; i < n; ++i)
                    p[i] = centroid[i] + t * (s.x[worst][i] - centroid[i]);
                return p;
            };

            auto xr = along(-1.0);
            const double fr = eval(xr);
            if (fr < s.f[best]) {
                auto xe = along(-2.0);
                const double fe = eval(xe);
                if (fe < fr) { s.x[worst] = std::move(xe); s.f[worst] = fe; }
                else { s.x[worst] = std::move(xr); s.f[worst] = fr; }
                continue;
            }
            if (fr < s.f[second]) {
                s.x[worst] = std::move(xr);
                s.f[worst] = fr;
                continue;
            }
            const bool outside = fr < s.f[worst];
            auto xc = along(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : s.f[worst])) {
                s.x[worst] = std::move(xc);
                s.f[worst] = fc;
                continue;
            }
            for (std::size_t k = 0; k <= n; ++k) {
                if (k == best) continue;
                for (std::size_t i = 0; i < n; ++i)
                    s.x[k][i] = s.x[best][i] + 0.5 * (s.x[k][i] - s.x[best][i]);
                s.f[k] = eval(s.x[k]);
            }
        }

        const auto it = std::min_element(s.f.begin(), s.f.end());
        const auto k = static_cast<std::size_t>(it - s.f.begin());
        const bool improved = s.f[k] < out.value - opt.f_tolerance;
        if (s.f[k] <= out.value) {
            out.x = s.x[k];
            out.value = s.f[k];
        }
        out.converged = done;
        if (!done || (round > 0 && !improved)) break;
    }
    out.evaluations = evals;
    return out;
}

std::vector<double> halton_point(int index, int dim) {
    static constexpr std::array<int, 16> primes{2, 3, 5, 7, 11, 13, 17, 19,
                                                23, 29, 31, 37, 41, 43, 47, 53};
    if (index < 1) throw DomainError("halton index must be >= 1");
    if (dim < 1 || dim > static_cast<int>(primes.size()))
        throw DomainError("halton dimension must lie in [1, 16]");
    std::vector<double> p(dim);
    for (int d = 0; d < dim; ++d) {
        const int base = primes[d];
        double f = 1.0, r = 0.0;
        for (int i = index; i > 0; i /= base) {
            f /= base;
            r += f * (i % base);
        }
        p[d] = r;
    }
    return p;
}

} // namespace rsrl
