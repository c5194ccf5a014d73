#pragma once

#include "uivi/tensor.hpp"

namespace uivi {

// Nodes and weights of the composite 16-point Gauss-Legendre rule with
// `panels` equal panels on [lo, hi].
void composite_gauss_legendre(double lo, double hi, int panels, Vec& nodes, Vec& weights);

}  // namespace uivi
