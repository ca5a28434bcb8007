#pragma once

#include <vector>

#include "nvsim/levmar.hpp"

namespace nvsim::fitmodels {

/// p = (A, f, phi, k, C): A cos(2 pi f t + phi) e^{-k t} + C
LevMarModel decaying_sinusoid(std::vector<double> t, std::vector<double> y);

/// p = (A1, A2, C, l1, l2), rates exp(l): A1 e^{-g1 t} + A2 e^{-g2 t} + C
LevMarModel biexponential(std::vector<double> t, std::vector<double> y);

/// p = (a_j, c_j, q_j)*n_peaks + (b): sum of a q^2/((f-c)^2+q^2) + b
LevMarModel lorentzian_sum(std::vector<double> f, std::vector<double> v, int n_peaks);

/// p = (a1, c1, q1, a2, c2, q2, psi, b):
/// |a1 L1 + a2 L2 e^{i psi}|^2 + b with L_j = q_j/(q_j + i(f - c_j))
LevMarModel coherent_doublet(std::vector<double> f, std::vector<double> v);

}  // namespace nvsim::fitmodels
