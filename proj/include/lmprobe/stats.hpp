#pragma once

#include <cstddef>
#include <span>

namespace lmprobe {

// Mean / sd / se with a t-based 95% confidence interval. The CI (and sd/se)
// are undefined for n < 2. Values are sorted internally before summation so
// the result is independent of input order.
struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double se = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    bool ci_defined = false;
};

Summary summarize_values(std::span<const double> values);

// two-sided 97.5% Student-t quantile, dof >= 1
double t_quantile_975(std::size_t dof);

}  // namespace lmprobe
