#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace hoigen {

struct GradCheckReport {
    double max_rel_error = 0.0;
    double tol = 0.0;
    int checked_coords = 0;
    int worst_coord = -1;
    bool passed = false;
};

/// Compares the analytic gradient of a scalar-valued function against central
/// finite differences. The finite-difference quotient divides by the actual
/// representable step (x+ − x−) accumulated in double, and the relative error
/// uses denominator max(1, |analytic|, |numeric|).
///
/// `max_coords` > 0 subsamples that many coordinates (seeded); 0 checks all.
template <class T>
GradCheckReport gradcheck(const std::function<TensorT<T>(const TensorT<T>&)>& f, TensorT<T> x,
                          double step, double tol, int max_coords = 0, uint64_t coord_seed = 17) {
    x.set_requires_grad(true);
    x.zero_grad();
    TensorT<T> y = f(x);
    if (y.size() != 1) tensor_fail("gradcheck", "function output must be scalar");
    if (!y.all_finite()) tensor_fail("gradcheck", "non-finite function value");
    y.backward();
    std::vector<T> analytic = x.grad();
    if (analytic.empty()) analytic.assign(static_cast<size_t>(x.size()), T(0));

    std::vector<int64_t> coords;
    const int64_t n = x.size();
    if (max_coords > 0 && max_coords < n) {
        Rng rng(coord_seed);
        std::vector<int64_t> all(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
        for (int i = 0; i < max_coords; ++i) {
            const uint64_t j = i + rng.below(static_cast<uint64_t>(n - i));
            std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
        }
        coords.assign(all.begin(), all.begin() + max_coords);
    } else {
        coords.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    }

    GradCheckReport report;
    report.tol = tol;
    report.checked_coords = static_cast<int>(coords.size());
    auto eval = [&](int64_t ci, T v) -> double {
        TensorT<T> xp = x.detach();
        xp.values()[static_cast<size_t>(ci)] = v;
        TensorT<T> out = f(xp);
        if (!out.all_finite()) tensor_fail("gradcheck", "non-finite function value during probing");
        return static_cast<double>(out.item());
    };
    for (int64_t ci : coords) {
        const T orig = x.values()[static_cast<size_t>(ci)];
        const T xp = static_cast<T>(static_cast<double>(orig) + step);
        const T xm = static_cast<T>(static_cast<double>(orig) - step);
        const double fp = eval(ci, xp);
        const double fm = eval(ci, xm);
        const double actual_step = static_cast<double>(xp) - static_cast<double>(xm);
        const double numeric = (fp - fm) / actual_step;
        const double a = static_cast<double>(analytic[static_cast<size_t>(ci)]);
        const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
        const double rel = std::fabs(a - numeric) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coord = static_cast<int>(ci);
        }
    }
    report.passed = report.max_rel_error <= tol;
    return report;
}

}  // namespace hoigen
