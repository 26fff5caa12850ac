#pragma once

#include "riskscape/common.hpp"
#include "riskscape/rng.hpp"

namespace riskscape {

// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending
// (lambda_1 >= ... >= lambda_dim), columns of eigenvectors orthonormal.
struct EigenDecomp {
    ParamVec eigenvalues;
    Matrix eigenvectors;

    Matrix reconstruct() const {
        return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
    }
};

// Dense symmetric solve; the input is symmetrized as (M + M^T)/2 first.
// Throws InvalidInput on non-finite entries or a non-square matrix.
EigenDecomp sym_eigen(const Matrix& m);

// Operator norm max(|lambda_1|, |lambda_dim|) of a symmetric matrix.
double sym_op_norm(const Matrix& m);

double lambda_min(const Matrix& m);
double lambda_max(const Matrix& m);

// Euclidean projection onto the centered ball of radius r.
ParamVec project_ball(const ParamVec& x, double r);

// Componentwise sign(x_i) * max(|x_i| - t, 0).
ParamVec soft_threshold(const ParamVec& x, double t);

// Haar-ish random orthogonal matrix via QR of a Gaussian matrix.
Matrix random_orthogonal(int d, Rng& rng);

}  // namespace riskscape
