#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace selinf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Response vector plus design matrix. Validated on construction.
class RegressionData {
public:
    RegressionData(Vector y, Matrix X, std::vector<std::string> column_names = {},
                   bool normalize_columns = false);

    const Vector& y() const { return y_; }
    const Matrix& X() const { return X_; }
    const std::vector<std::string>& column_names() const { return names_; }
    bool normalized() const { return normalized_; }
    Index n() const { return X_.rows(); }
    Index p() const { return X_.cols(); }

    /// Index of a named column; throws InvalidArgument when absent.
    Index column_index(const std::string& name) const;

    /// Same design, different response.
    RegressionData with_response(Vector y) const;

private:
    Vector y_;
    Matrix X_;
    std::vector<std::string> names_;
    bool normalized_ = false;
};

/// Active set E (strictly increasing) and the signs z_E.
struct SelectedModel {
    std::vector<Index> active;
    std::vector<int> signs;

    std::size_t size() const { return active.size(); }
    bool empty() const { return active.empty(); }
    bool operator==(const SelectedModel&) const = default;

    /// Throws InvalidArgument unless the invariants hold for a p-column design.
    void validate(Index p) const;
};

/// Projection onto col(X_E) together with X_E^+ and (X_E^T X_E)^{-1}.
struct ProjectionPair {
    Matrix P;         // n x n
    Matrix pinv;      // |E| x n
    Matrix gram_inv;  // |E| x |E|
    Matrix basis;     // n x |E|, orthonormal basis of col(X_E)

    Index n() const { return P.rows(); }
    Index rank() const { return basis.cols(); }
    Index df() const { return n() - rank(); }

    /// (I - P) v
    Vector residual(const Vector& v) const;
    /// P v
    Vector project(const Vector& v) const;
};

Matrix select_columns(const Matrix& X, const std::vector<Index>& cols);

ProjectionPair build_projection(const Matrix& X, const std::vector<Index>& cols);
ProjectionPair build_projection(const RegressionData& data, const SelectedModel& model);

/// ||(I-P)y||^2 / (n - |E|)
double ols_sigma2(const RegressionData& data, const ProjectionPair& proj);
double ols_sigma2(const Vector& y, const ProjectionPair& proj);

/// Scale every column to unit Euclidean norm. Zero columns are rejected.
void normalize_columns(Matrix& X);

/// Loads a CSV with a header row. `response` names the y column; every
/// other column becomes part of X.
RegressionData read_csv(const std::string& path, const std::string& response,
                        bool normalize_columns = false);

}  // namespace selinf
