#include "polgs/image.hpp"

#include <cmath>
#include <cassert>

namespace polgs {

double max_abs_diff(const Image& a, const Image& b) {
    assert(a.same_shape(b));
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace polgs
