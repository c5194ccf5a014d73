#include "uivi/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include "uivi/error.hpp"

namespace uivi {

void composite_gauss_legendre(double lo, double hi, int panels, Vec& nodes, Vec& weights) {
  using Rule = boost::math::quadrature::gauss<double, 16>;
  require(panels >= 1 && hi > lo, ErrorKind::kInvalidArgument, "composite_gauss_legendre: bad interval");
  const auto& absc = Rule::abscissa();
  const auto& wts = Rule::weights();
  const double half = 0.5 * (hi - lo) / panels;
  nodes.clear();
  weights.clear();
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (2 * p + 1) * half;
    // 16 points: the stored abscissae are the 8 positive ones.
    for (std::size_t i = 0; i < absc.size(); ++i) {
      nodes.push_back(mid - half * absc[i]);
      weights.push_back(half * wts[i]);
      nodes.push_back(mid + half * absc[i]);
      weights.push_back(half * wts[i]);
    }
  }
}

}  // namespace uivi
