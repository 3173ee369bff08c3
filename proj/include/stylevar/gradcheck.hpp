#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stylevar/tensor.hpp"

namespace stylevar {

struct GradCheckReport {
    std::vector<real> analytic;
    std::vector<real> numeric;
    std::vector<real> rel_err;
    real max_rel_err = 0;
    bool pass = false;
};

// Central finite differences against reverse-mode gradients for a
// deterministic scalar-valued f. Relative error per element is
// |a - n| / max(1, |a|, |n|).
inline GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                                  real step = real(1e-5), real tol = real(1e-5)) {
    GradCheckReport rep;

    real f0;
    {
        NoGradScope ng;
        Tensor x0 = Tensor::from(x.shape(), x.data());
        f0 = f(x0).item();
        Tensor x1 = Tensor::from(x.shape(), x.data());
        real f1 = f(x1).item();
        require(f0 == f1, "grad_check: f is non-deterministic (", f0, " vs ", f1, ")");
    }

    {
        Graph g;
        GraphScope scope(g);
        Tensor xg = Tensor::from(x.shape(), x.data(), /*requires_grad=*/true);
        Tensor loss = f(xg);
        require(loss.numel() == 1, "grad_check: f must be scalar-valued");
        backward(g, loss);
        rep.analytic = xg.has_grad() ? xg.grad() : std::vector<real>(x.data().size(), real(0));
    }

    rep.numeric.resize(x.data().size());
    {
        NoGradScope ng;
        for (std::size_t i = 0; i < x.data().size(); ++i) {
            std::vector<real> d = x.data();
            d[i] += step;
            real fp = f(Tensor::from(x.shape(), d)).item();
            d[i] -= 2 * step;
            real fm = f(Tensor::from(x.shape(), d)).item();
            rep.numeric[i] = (fp - fm) / (2 * step);
        }
    }

    rep.rel_err.resize(x.data().size());
    for (std::size_t i = 0; i < rep.rel_err.size(); ++i) {
        real a = rep.analytic[i], n = rep.numeric[i];
        real denom = std::max({real(1), std::fabs(a), std::fabs(n)});
        rep.rel_err[i] = std::fabs(a - n) / denom;
        rep.max_rel_err = std::max(rep.max_rel_err, rep.rel_err[i]);
    }
    rep.pass = rep.max_rel_err <= tol;
    return rep;
}

}  // namespace stylevar
