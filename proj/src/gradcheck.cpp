#include "wdrt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wdrt/image.hpp"

namespace wdrt {

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << "max rel err " << max_rel_err << " over " << coords_checked
       << " coords (worst: analytic " << worst_analytic << " vs numeric "
       << worst_numeric << " at index " << worst_index << ")";
    return os.str();
}

GradCheckReport gradient_check(const std::function<double()>& loss,
                               std::span<double> theta,
                               std::span<const double> analytic, double step,
                               size_t max_coords, uint64_t seed) {
    if (theta.size() != analytic.size()) {
        throw Error("gradient_check: gradient size mismatch");
    }
    if (step <= 0.0) throw Error("gradient_check: step must be positive");

    std::vector<size_t> idx(theta.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    if (max_coords > 0 && theta.size() > max_coords) {
        std::mt19937_64 eng(seed);
        for (size_t i = 0; i < max_coords; ++i) {
            const size_t j = i + eng() % (idx.size() - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(max_coords);
    }

    GradCheckReport rep;
    for (size_t i : idx) {
        const double saved = theta[i];
        theta[i] = saved + step;
        const double fp = loss();
        theta[i] = saved - step;
        const double fm = loss();
        theta[i] = saved;

        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(a - numeric) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.worst_analytic = a;
            rep.worst_numeric = numeric;
        }
        ++rep.coords_checked;
    }
    return rep;
}

}  // namespace wdrt
