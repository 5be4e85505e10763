#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace fwid {

// Half-vectorization, lower triangle in column-major order:
// p=3 gives (m11, m21, m31, m22, m32, m33).
class VechIndex {
  public:
    explicit VechIndex(int p);

    int p() const { return p_; }
    int size() const { return k_; }

    // (j, k) are 1-based with j >= k.
    int index(int j, int k) const;

    // Linear index -> 1-based (j, k), j >= k.
    std::pair<int, int> pair(int idx) const { return pairs_[idx]; }

  private:
    int p_;
    int k_;
    std::vector<std::pair<int, int>> pairs_;
};

Eigen::VectorXd vech(const Eigen::MatrixXd& m, double sym_tol = 1e-10);
Eigen::MatrixXd unvech(const Eigen::VectorXd& v);

}  // namespace fwid
