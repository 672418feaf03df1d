#pragma once

#include "gnet/autodiff.hpp"
#include "gnet/errors.hpp"
#include "gnet/param_store.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace gnet {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_path;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t entries_checked = 0;
};

/// |a - n| / max(|a|, |n|, 1e-8)
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares reverse-mode gradients of `loss` against central differences
/// (f(p+eps) - f(p-eps)) / (2 eps) for every scalar of every parameter.
/// `loss` must be deterministic and return a 1×1 Value built from `params`.
inline GradCheckResult finite_difference_check(const std::function<ad::Value(ParamStore&)>& loss, ParamStore& params,
                                               double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) {
        throw std::invalid_argument("finite_difference_check: eps " + std::to_string(eps) + " outside [1e-6, 1e-3]");
    }
    params.zero_grad();
    auto root = loss(params);
    if (!std::isfinite(root.item())) throw numeric_error("finite_difference_check: non-finite loss at base point");
    ad::backward(root);

    auto eval = [&](const std::string& path, std::size_t i) {
        ad::NoGradGuard guard;
        const double v = loss(params).item();
        if (!std::isfinite(v)) {
            throw numeric_error("finite_difference_check: non-finite loss perturbing '" + path + "'[" +
                                std::to_string(i) + "]");
        }
        return v;
    };

    GradCheckResult res;
    for (auto& [path, value] : params) {
        auto data = value.data();
        auto grad = value.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            data[i] = orig + eps;
            const double fp = eval(path, i);
            data[i] = orig - eps;
            const double fm = eval(path, i);
            data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double err = relative_error(grad[i], numeric);
            ++res.entries_checked;
            if (err > res.max_relative_error || res.entries_checked == 1) {
                res.max_relative_error = err;
                res.worst_path = path;
                res.worst_index = i;
                res.worst_analytic = grad[i];
                res.worst_numeric = numeric;
            }
        }
    }
    return res;
}

} // namespace gnet
