#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "selinf/harness.hpp"
#include "selinf/model.hpp"
#include "selinf/rng.hpp"

namespace testsupport {

using selinf::Index;
using selinf::Matrix;
using selinf::Vector;

/// First p columns of a random orthogonal n x n matrix.
inline Matrix orthogonal_design(Index n, Index p, std::uint64_t seed) {
    selinf::Rng rng(seed);
    Matrix G(n, p);
    for (Index j = 0; j < p; ++j) G.col(j) = rng.normal_vector(n);
    Eigen::HouseholderQR<Matrix> qr(G);
    return qr.householderQ() * Matrix::Identity(n, p);
}

inline Matrix random_design(Index n, Index p, double rho, std::uint64_t seed) {
    selinf::Rng rng(seed);
    return selinf::equicorrelated_design(n, p, rho, rng);
}

/// y = X beta + noise with `k` leading coefficients of size `amp`, alternating signs.
inline Vector sparse_response(const Matrix& X, Index k, double amp, double sigma, std::uint64_t seed) {
    selinf::Rng rng(seed);
    Vector beta = Vector::Zero(X.cols());
    for (Index j = 0; j < std::min<Index>(k, X.cols()); ++j) beta[j] = (j % 2 == 0 ? amp : -amp);
    return X * beta + sigma * rng.normal_vector(X.rows());
}

}  // namespace testsupport
