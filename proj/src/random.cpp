#include "deepbasket/random.hpp"

#include <cmath>

#include "deepbasket/errors.hpp"

namespace deepbasket {

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_normal_cdf: p must lie in (0, 1)");
    return detail::ppnd16(p);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace deepbasket
