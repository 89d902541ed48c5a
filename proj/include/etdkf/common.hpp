#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>

namespace etdkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// 0-based internally; configs, CSV and CLI use 1-based ids.
using NodeId = std::size_t;
using NodeSet = std::set<NodeId>;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string shape(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what)
{
    if (m.rows() != rows || m.cols() != cols)
        throw ConfigError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + shape(m));
}

inline void require_size(const Vector& v, Eigen::Index n, const std::string& what)
{
    if (v.size() != n)
        throw ConfigError(what + ": expected length " + std::to_string(n) + ", got " +
                          std::to_string(v.size()));
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Matrix& m, double tol = 1e-9)
{
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double min_eigenvalue(const Matrix& m)
{
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Matrix& m, double tol = 1e-9)
{
    if (!is_symmetric(m, tol)) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return min_eigenvalue(m) >= -tol * scale;
}

inline bool is_pd(const Matrix& m)
{
    if (!is_symmetric(m)) return false;
    Eigen::LLT<Matrix> llt(symmetrize(m));
    return llt.info() == Eigen::Success;
}

inline double spectral_norm(const Matrix& m)
{
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

// Moore-Penrose inverse with the same relative cutoff used for ranks.
inline Matrix pseudo_inverse(const Matrix& m, double rel_tol = 1e-9)
{
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Vector inv = Vector::Zero(s.size());
    const double cut = s.size() ? rel_tol * s(0) : 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

} // namespace etdkf
