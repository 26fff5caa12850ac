#pragma once

#include <functional>
#include <vector>

#include "riskscape/common.hpp"

namespace riskscape {

struct QuadratureRule {
    enum class Kind { gauss_hermite, gauss_legendre, tensor2d };
    ParamVec nodes;
    ParamVec weights;
    Kind kind = Kind::gauss_hermite;
};

// Nodes/weights for integrals against e^{-x^2} on the real line (Golub-Welsch
// on the Hermite Jacobi matrix). Valid for 1 <= m <= 200.
QuadratureRule gauss_hermite(int m);

// Nodes/weights on [-1, 1] with unit weight.
QuadratureRule gauss_legendre(int m);

// Product rule over pairs of Gauss-Hermite axes; nodes are m^2 x 2.
struct TensorRule2 {
    Matrix nodes;
    ParamVec weights;
};
TensorRule2 tensor2(const QuadratureRule& a, const QuadratureRule& b);

// E[f(U)] for U ~ N(0,1) using a Gauss-Hermite rule (change of variable
// u = sqrt(2) x, normalization 1/sqrt(pi)).
double normal_expect(const QuadratureRule& gh, const std::function<double(double)>& f);

// E[f(U1,U2)] for independent standard normals.
double normal_expect2(const QuadratureRule& gh, const std::function<double(double, double)>& f);

// integral of f(t) phi_sigma(t) dt over the real line for a piecewise-smooth
// f with kinks at the given |t| locations; each smooth segment (between
// breakpoints, truncated at +-12 sigma) is handled by Gauss-Legendre. Spectral
// accuracy is retained across the kinks this way.
double gauss_density_expect(const std::function<double(double)>& f, double sigma,
                            const std::vector<double>& breakpoints, int nodes_per_segment = 60);

}  // namespace riskscape
