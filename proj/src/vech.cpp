#include "fwid/vech.hpp"

#include <cmath>

#include "fwid/errors.hpp"

namespace fwid {

VechIndex::VechIndex(int p) : p_(p), k_(p * (p + 1) / 2) {
    if (p < 1) throw InvalidParameterError("VechIndex: p >= 1 required");
    pairs_.reserve(k_);
    for (int c = 1; c <= p; ++c)
        for (int r = c; r <= p; ++r) pairs_.emplace_back(r, c);
}

int VechIndex::index(int j, int k) const {
    if (k > j) std::swap(j, k);
    if (k < 1 || j > p_) throw InvalidParameterError("VechIndex: index out of range");
    // Offset of column k plus row position.
    return (k - 1) * p_ - (k - 1) * (k - 2) / 2 + (j - k);
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m, double sym_tol) {
    const int p = static_cast<int>(m.rows());
    if (m.cols() != p) throw InvalidParameterError("vech: matrix must be square");
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale)
        throw InvalidParameterError("vech: matrix not symmetric within tolerance");
    Eigen::VectorXd v(p * (p + 1) / 2);
    int idx = 0;
    for (int c = 0; c < p; ++c)
        for (int r = c; r < p; ++r) v[idx++] = m(r, c);
    return v;
}

Eigen::MatrixXd unvech(const Eigen::VectorXd& v) {
    const int k = static_cast<int>(v.size());
    const int p = static_cast<int>((std::sqrt(8.0 * k + 1.0) - 1.0) / 2.0 + 0.5);
    if (p * (p + 1) / 2 != k) throw InvalidParameterError("unvech: length is not p(p+1)/2");
    Eigen::MatrixXd m(p, p);
    int idx = 0;
    for (int c = 0; c < p; ++c)
        for (int r = c; r < p; ++r) {
            m(r, c) = v[idx];
            m(c, r) = v[idx];
            ++idx;
        }
    return m;
}

}  // namespace fwid
