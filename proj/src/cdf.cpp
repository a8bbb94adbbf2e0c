#include "condwalk/cdf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "condwalk/error.hpp"
#include "condwalk/format.hpp"

namespace condwalk {

double EmpiricalCdf::sup_gap(const std::function<double(double)>& reference) const {
    double gap = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) gap = std::max(gap, std::abs(value[k] - reference(u[k])));
    return gap;
}

void validate_u_grid(const std::vector<double>& u) {
    if (u.empty()) throw DomainError("u grid is empty");
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!std::isfinite(u[k]) || u[k] < 0.0) throw DomainError("u grid must be finite and nonnegative");
        if (k > 0 && !(u[k] > u[k - 1])) throw DomainError("u grid must be strictly increasing");
    }
}

void write_cdf_csv(std::ostream& os, const EmpiricalCdf& cdf) {
    os << "u,value\n";
    for (std::size_t k = 0; k < cdf.u.size(); ++k)
        os << format_double(cdf.u[k]) << ',' << format_double(cdf.value[k]) << '\n';
}

}  // namespace condwalk
