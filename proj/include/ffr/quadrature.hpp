#pragma once

#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "ffr/errors.hpp"

namespace ffr {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

namespace detail {

template <unsigned N>
GaussRule make_rule()
{
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    GaussRule r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
            r.x.push_back(0.0);
            r.w.push_back(w[i]);
        } else {
            r.x.push_back(-a[i]);
            r.w.push_back(w[i]);
            r.x.push_back(a[i]);
            r.w.push_back(w[i]);
        }
    }
    return r;
}

} // namespace detail

/// Supported orders: 7, 10, 15, 20, 25, 30.
inline const GaussRule& gauss_rule(int order)
{
    static const GaussRule r7 = detail::make_rule<7>(), r10 = detail::make_rule<10>(),
                           r15 = detail::make_rule<15>(), r20 = detail::make_rule<20>(),
                           r25 = detail::make_rule<25>(), r30 = detail::make_rule<30>();
    switch (order) {
    case 7: return r7;
    case 10: return r10;
    case 15: return r15;
    case 20: return r20;
    case 25: return r25;
    case 30: return r30;
    default: throw domain_error("gauss_rule: order must be one of 7, 10, 15, 20, 25, 30");
    }
}

} // namespace ffr
