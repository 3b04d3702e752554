#include "lmprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace lmprobe {

double t_quantile_975(std::size_t dof) {
    if (dof < 1) throw std::invalid_argument("t quantile needs at least 1 degree of freedom");
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

Summary summarize_values(std::span<const double> values) {
    Summary s;
    s.n = values.size();
    if (s.n == 0) return s;

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    double sum = 0.0;
    for (double v : sorted) sum += v;
    s.mean = sum / static_cast<double>(s.n);

    if (s.n < 2) {
        s.sd = s.se = std::numeric_limits<double>::quiet_NaN();
        s.ci95_low = s.ci95_high = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sq = 0.0;
    for (double v : sorted) {
        const double d = v - s.mean;
        sq += d * d;
    }
    s.sd = std::sqrt(sq / static_cast<double>(s.n - 1));
    s.se = s.sd / std::sqrt(static_cast<double>(s.n));
    const double half = t_quantile_975(s.n - 1) * s.se;
    s.ci95_low = s.mean - half;
    s.ci95_high = s.mean + half;
    s.ci_defined = true;
    return s;
}

}  // namespace lmprobe
