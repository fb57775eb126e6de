#include "selinf/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "selinf/error.hpp"

namespace selinf {

RegressionData::RegressionData(Vector y, Matrix X, std::vector<std::string> column_names,
                               bool normalize)
    : y_(std::move(y)), X_(std::move(X)), names_(std::move(column_names)), normalized_(normalize) {
    require(X_.rows() >= 2, "need at least 2 observations");
    require(X_.cols() >= 1, "need at least 1 column");
    require(y_.size() == X_.rows(), "response length does not match design rows");
    require(y_.allFinite(), "response contains NaN or Inf");
    require(X_.allFinite(), "design contains NaN or Inf");
    require(names_.empty() || names_.size() == static_cast<std::size_t>(X_.cols()),
            "column_names length does not match design columns");
    if (names_.empty()) {
        names_.reserve(X_.cols());
        for (Index j = 0; j < X_.cols(); ++j) names_.push_back("x" + std::to_string(j));
    }
    if (normalized_) normalize_columns(X_);
}

Index RegressionData::column_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    require(it != names_.end(), "unknown column '" + name + "'");
    return static_cast<Index>(it - names_.begin());
}

RegressionData RegressionData::with_response(Vector y) const {
    RegressionData copy = *this;
    require(y.size() == copy.n(), "response length does not match design rows");
    require(y.allFinite(), "response contains NaN or Inf");
    copy.y_ = std::move(y);
    return copy;
}

void SelectedModel::validate(Index p) const {
    require(signs.size() == active.size(), "signs and active set differ in length");
    for (std::size_t i = 0; i < active.size(); ++i) {
        require(active[i] >= 0 && active[i] < p, "active index out of range");
        require(i == 0 || active[i - 1] < active[i], "active indices must be strictly increasing");
        require(signs[i] == 1 || signs[i] == -1, "signs must be +1 or -1");
    }
}

Vector ProjectionPair::residual(const Vector& v) const {
    if (rank() == 0) return v;
    return v - basis * (basis.transpose() * v);
}

Vector ProjectionPair::project(const Vector& v) const {
    if (rank() == 0) return Vector::Zero(v.size());
    return basis * (basis.transpose() * v);
}

Matrix select_columns(const Matrix& X, const std::vector<Index>& cols) {
    Matrix out(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
    return out;
}

ProjectionPair build_projection(const Matrix& X, const std::vector<Index>& cols) {
    const Index n = X.rows();
    const Index k = static_cast<Index>(cols.size());
    ProjectionPair out;
    if (k == 0) {
        out.P = Matrix::Zero(n, n);
        out.pinv = Matrix::Zero(0, n);
        out.gram_inv = Matrix::Zero(0, 0);
        out.basis = Matrix::Zero(n, 0);
        return out;
    }
    if (k > n) fail(ErrorCode::RankDeficient, "more selected columns than observations");
    const Matrix XE = select_columns(X, cols);
    Eigen::JacobiSVD<Matrix> svd(XE, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    if (!(s[0] > 0.0) || s[k - 1] <= 1e-10 * s[0]) {
        fail(ErrorCode::RankDeficient, "selected columns are not linearly independent");
    }
    const Vector inv_s = s.cwiseInverse();
    out.basis = svd.matrixU();
    out.P = out.basis * out.basis.transpose();
    out.pinv = svd.matrixV() * inv_s.asDiagonal() * out.basis.transpose();
    out.gram_inv = svd.matrixV() * inv_s.cwiseAbs2().asDiagonal() * svd.matrixV().transpose();
    return out;
}

ProjectionPair build_projection(const RegressionData& data, const SelectedModel& model) {
    model.validate(data.p());
    return build_projection(data.X(), model.active);
}

double ols_sigma2(const Vector& y, const ProjectionPair& proj) {
    const Index df = proj.df();
    if (df < 1) fail(ErrorCode::ZeroResidualDf, "no residual degrees of freedom");
    return proj.residual(y).squaredNorm() / static_cast<double>(df);
}

double ols_sigma2(const RegressionData& data, const ProjectionPair& proj) {
    return ols_sigma2(data.y(), proj);
}

void normalize_columns(Matrix& X) {
    for (Index j = 0; j < X.cols(); ++j) {
        const double norm = X.col(j).norm();
        require(norm > 0.0, "cannot normalize a zero column");
        X.col(j) /= norm;
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    for (auto& s : cells) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (cell.empty() || used != cell.size()) {
        fail(ErrorCode::InvalidArgument, "non-numeric cell '" + cell + "' at row " +
                                             std::to_string(row) + ", column '" + column + "'");
    }
    return value;
}

}  // namespace

RegressionData read_csv(const std::string& path, const std::string& response, bool normalize) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::InvalidArgument, "empty CSV '" + path + "'");
    const auto header = split_csv_line(line);
    auto rit = std::find(header.begin(), header.end(), response);
    require(rit != header.end(), "response column '" + response + "' not found");
    const std::size_t ycol = static_cast<std::size_t>(rit - header.begin());

    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != ycol) names.push_back(header[c]);

    std::vector<std::vector<double>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        require(cells.size() == header.size(),
                "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(header.size()));
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_cell(cells[c], row, header[c]);
        rows.push_back(std::move(values));
    }
    const Index n = static_cast<Index>(rows.size());
    const Index p = static_cast<Index>(names.size());
    require(p >= 1, "CSV has no predictor columns");
    Vector y(n);
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i) {
        Index j = 0;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == ycol) y[i] = rows[i][c];
            else X(i, j++) = rows[i][c];
        }
    }
    return RegressionData(std::move(y), std::move(X), std::move(names), normalize);
}

}  // namespace selinf
