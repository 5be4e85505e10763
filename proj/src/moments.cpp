#include "fwid/moments.hpp"

#include <cmath>

#include "fwid/errors.hpp"

namespace fwid {

namespace {

constexpr double kDenomTol = 1e-12;

bool denom_ok(double den, double num_scale) {
    return std::fabs(den) >= kDenomTol * std::max(1.0, std::fabs(num_scale));
}

// Raw-coordinate view of a flat two-factor theta, indexed by the
// 1-based variable labels.
struct Theta2View {
    const Eigen::VectorXd& v;
    ThetaLayout L;

    double r1(int j) const { return v[L.rho(j, 1)]; }
    double r2(int j) const { return v[L.rho(j, 2)]; }
    double w(int j) const { return v[L.omega(j)]; }
    double chi() const { return v[L.chi()]; }
    double s12() const { return v[L.sigma12()]; }
    double beta() const { return v[L.beta()]; }
    double d3() const { return beta() * r1(3) - s12() * r2(3); }
    double d4() const { return beta() * r1(4) - s12() * r2(4); }
};

// tau_3k and tau_4k share one form up to swapping the roles of variables
// 3 and 4; `a` is the anchor (3 or 4), `o` the other.
bool tau_anchor(const Theta2View& t, int a, int o, int k, double& out) {
    const double A = t.r2(k) * t.r1(o) - t.r1(k) * t.r2(o);
    const double B = t.beta() * t.r1(k) - t.s12() * t.r2(k);
    const double N = t.r2(a) * A + t.chi() * B;
    const double D = t.beta() * t.r1(o) - t.s12() * t.r2(o);
    if (!denom_ok(D, N)) return false;
    out = N / D;
    return true;
}

bool tau_high(const Theta2View& t, int j, int k, double& out) {
    const double q = t.r1(3) * t.r1(4) * t.r2(j) * t.r2(k) -
                     t.r2(3) * t.r2(4) * t.r1(j) * t.r1(k);
    const double r = t.r2(3) * t.r2(4) * (t.r1(j) * t.r2(k) + t.r2(j) * t.r1(k)) -
                     (t.r1(3) * t.r2(4) + t.r2(3) * t.r1(4)) * t.r2(j) * t.r2(k);
    const double Bj = t.beta() * t.r1(j) - t.s12() * t.r2(j);
    const double Bk = t.beta() * t.r1(k) - t.s12() * t.r2(k);
    const double N = t.beta() * q + t.s12() * r + t.chi() * Bk * Bj;
    const double D = t.d3() * t.d4();
    if (!denom_ok(t.d3(), N) || !denom_ok(t.d4(), N)) return false;
    out = N / D;
    return true;
}

bool tau_value(const Theta2View& t, int j, int k, double& out) {
    if (j == 3) return tau_anchor(t, 3, 4, k, out);
    if (j == 4) return tau_anchor(t, 4, 3, k, out);
    return tau_high(t, j, k, out);
}

bool moments_1f(int p, const Eigen::VectorXd& theta, Eigen::VectorXd& out) {
    ThetaLayout L{Model::OneFactor, p};
    const double beta = theta[L.beta()];
    if (!(std::fabs(beta) > 1e-100)) return false;
    out.resize(moment_dim(p));
    int idx = 0;
    for (int c = 1; c <= p; ++c)
        for (int r = c; r <= p; ++r) {
            if (r == c)
                out[idx] = theta[L.omega(r)];
            else if (c == 1)
                out[idx] = theta[L.rho(r)];
            else
                out[idx] = theta[L.rho(c)] * theta[L.rho(r)] / beta;
            ++idx;
        }
    return out.allFinite();
}

bool moments_2f(int p, const Eigen::VectorXd& theta, Eigen::VectorXd& out) {
    Theta2View t{theta, ThetaLayout{Model::TwoFactor, p}};
    out.resize(moment_dim(p));
    int idx = 0;
    for (int c = 1; c <= p; ++c)
        for (int r = c; r <= p; ++r) {
            double val;
            if (r == c)
                val = t.w(r);
            else if (c == 1)
                val = (r == 2) ? t.s12() : t.r1(r);
            else if (c == 2)
                val = t.r2(r);
            else if (c == 3 && r == 4)
                val = t.chi();
            else {
                if (!tau_value(t, c, r, val)) return false;
            }
            out[idx++] = val;
        }
    return out.allFinite();
}

// d tau / d theta' rows. Each writes the derivative of tau (not of the
// moment; the caller negates).
void tau_anchor_grad(const Theta2View& t, int a, int o, int k,
                     Eigen::Ref<Eigen::RowVectorXd> g) {
    const ThetaLayout& L = t.L;
    const double A = t.r2(k) * t.r1(o) - t.r1(k) * t.r2(o);
    const double B = t.beta() * t.r1(k) - t.s12() * t.r2(k);
    const double N = t.r2(a) * A + t.chi() * B;
    const double D = t.beta() * t.r1(o) - t.s12() * t.r2(o);
    const double D2 = D * D;
    g.setZero();
    g[L.rho(a, 2)] += A / D;
    g[L.rho(o, 1)] += (t.r2(a) * t.r2(k) * D - N * t.beta()) / D2;
    g[L.rho(o, 2)] += (-t.r2(a) * t.r1(k) * D + N * t.s12()) / D2;
    g[L.rho(k, 1)] += (-t.r2(a) * t.r2(o) + t.chi() * t.beta()) / D;
    g[L.rho(k, 2)] += (t.r2(a) * t.r1(o) - t.chi() * t.s12()) / D;
    g[L.chi()] += B / D;
    g[L.sigma12()] += (-t.chi() * t.r2(k) * D + N * t.r2(o)) / D2;
    g[L.beta()] += (t.chi() * t.r1(k) * D - N * t.r1(o)) / D2;
}

void tau_high_grad(const Theta2View& t, int j, int k,
                   Eigen::Ref<Eigen::RowVectorXd> g) {
    const ThetaLayout& L = t.L;
    const double b = t.beta(), s = t.s12(), c = t.chi();
    const double r13 = t.r1(3), r23 = t.r2(3), r14 = t.r1(4), r24 = t.r2(4);
    const double r1j = t.r1(j), r2j = t.r2(j), r1k = t.r1(k), r2k = t.r2(k);
    const double q = r13 * r14 * r2j * r2k - r23 * r24 * r1j * r1k;
    const double rr = r23 * r24 * (r1j * r2k + r2j * r1k) -
                      (r13 * r24 + r23 * r14) * r2j * r2k;
    const double Bj = b * r1j - s * r2j;
    const double Bk = b * r1k - s * r2k;
    const double N = b * q + s * rr + c * Bk * Bj;
    const double D3 = t.d3(), D4 = t.d4();
    const double D = D3 * D4;
    const double D2 = D * D;

    auto entry = [&](double dN, double dD) { return (dN * D - N * dD) / D2; };

    g.setZero();
    g[L.rho(3, 1)] += entry(b * r14 * r2j * r2k + s * (-r24 * r2j * r2k), b * D4);
    g[L.rho(3, 2)] += entry(b * (-r24 * r1j * r1k) +
                                s * (r24 * (r1j * r2k + r2j * r1k) - r14 * r2j * r2k),
                            -s * D4);
    g[L.rho(4, 1)] += entry(b * r13 * r2j * r2k + s * (-r23 * r2j * r2k), b * D3);
    g[L.rho(4, 2)] += entry(b * (-r23 * r1j * r1k) +
                                s * (r23 * (r1j * r2k + r2j * r1k) - r13 * r2j * r2k),
                            -s * D3);
    g[L.rho(j, 1)] += entry(b * (-r23 * r24 * r1k) + s * r23 * r24 * r2k + c * Bk * b, 0.0);
    g[L.rho(j, 2)] += entry(b * r13 * r14 * r2k +
                                s * (r23 * r24 * r1k - (r13 * r24 + r23 * r14) * r2k) -
                                c * Bk * s,
                            0.0);
    g[L.rho(k, 1)] += entry(b * (-r23 * r24 * r1j) + s * r23 * r24 * r2j + c * b * Bj, 0.0);
    g[L.rho(k, 2)] += entry(b * r13 * r14 * r2j +
                                s * (r23 * r24 * r1j - (r13 * r24 + r23 * r14) * r2j) -
                                c * s * Bj,
                            0.0);
    g[L.chi()] += entry(Bk * Bj, 0.0);
    g[L.sigma12()] += entry(rr + c * (-r2k * Bj - Bk * r2j), -r23 * D4 - r24 * D3);
    g[L.beta()] += entry(q + c * (r1k * Bj + Bk * r1j), r13 * D4 + r14 * D3);
}

bool jac_1f(int p, const Eigen::VectorXd& theta, Eigen::MatrixXd& D) {
    ThetaLayout L{Model::OneFactor, p};
    const double beta = theta[L.beta()];
    if (!(std::fabs(beta) > 1e-100)) return false;
    D.setZero(moment_dim(p), L.dim());
    int idx = 0;
    for (int c = 1; c <= p; ++c)
        for (int r = c; r <= p; ++r) {
            if (r == c)
                D(idx, L.omega(r)) = -1.0;
            else if (c == 1)
                D(idx, L.rho(r)) = -1.0;
            else {
                const double rj = theta[L.rho(c)], rk = theta[L.rho(r)];
                D(idx, L.rho(c)) = -rk / beta;
                D(idx, L.rho(r)) = -rj / beta;
                D(idx, L.beta()) = rj * rk / (beta * beta);
            }
            ++idx;
        }
    return D.allFinite();
}

bool jac_2f(int p, const Eigen::VectorXd& theta, Eigen::MatrixXd& D) {
    Theta2View t{theta, ThetaLayout{Model::TwoFactor, p}};
    const ThetaLayout& L = t.L;
    double unused;
    D.setZero(moment_dim(p), L.dim());
    Eigen::RowVectorXd g(L.dim());
    int idx = 0;
    for (int c = 1; c <= p; ++c)
        for (int r = c; r <= p; ++r) {
            if (r == c)
                D(idx, L.omega(r)) = -1.0;
            else if (c == 1)
                D(idx, (r == 2) ? L.sigma12() : L.rho(r, 1)) = -1.0;
            else if (c == 2)
                D(idx, L.rho(r, 2)) = -1.0;
            else if (c == 3 && r == 4)
                D(idx, L.chi()) = -1.0;
            else {
                if (!tau_value(t, c, r, unused)) return false;
                if (c == 3)
                    tau_anchor_grad(t, 3, 4, r, g);
                else if (c == 4)
                    tau_anchor_grad(t, 4, 3, r, g);
                else
                    tau_high_grad(t, c, r, g);
                D.row(idx) = -g;
            }
            ++idx;
        }
    return D.allFinite();
}

}  // namespace

double tau_2f(const TwoFactorTheta& theta, int j, int k) {
    const int p = theta.p();
    if (j < 3 || j >= k || k > p || k < 5)
        throw InvalidParameterError("tau_2f: need 3 <= j < k <= p with k >= 5");
    Eigen::VectorXd v = theta.to_vector();
    Theta2View t{v, ThetaLayout{Model::TwoFactor, p}};
    double out;
    if (!tau_value(t, j, k, out))
        throw SingularMomentError("tau_2f: beta*rho_j1 - sigma12*rho_j2 vanishes");
    return out;
}

Eigen::VectorXd theta_moments(Model model, int p, const Eigen::VectorXd& theta) {
    Eigen::VectorXd out;
    if (!theta_moments_safe(model, p, theta, out))
        throw SingularMomentError("theta_moments: singular or non-finite evaluation");
    return out;
}

bool theta_moments_safe(Model model, int p, const Eigen::VectorXd& theta,
                        Eigen::VectorXd& out) noexcept {
    if (theta.size() != theta_dim(model, p)) return false;
    return model == Model::OneFactor ? moments_1f(p, theta, out) : moments_2f(p, theta, out);
}

Eigen::VectorXd gbar(Model model, const Eigen::VectorXd& theta, const MomentSystem& ms) {
    if (theta.size() != theta_dim(model, ms.p))
        throw InvalidParameterError("gbar: theta dimension does not match the moment system");
    return ms.gbar_base - theta_moments(model, ms.p, theta);
}

ThetaJacobian jacobian_theta(Model model, int p, const Eigen::VectorXd& theta) {
    ThetaJacobian J;
    if (!jacobian_theta_safe(model, p, theta, J.D))
        throw SingularMomentError("jacobian_theta: singular or non-finite evaluation");
    return J;
}

bool jacobian_theta_safe(Model model, int p, const Eigen::VectorXd& theta,
                         Eigen::MatrixXd& D) noexcept {
    if (theta.size() != theta_dim(model, p)) return false;
    return model == Model::OneFactor ? jac_1f(p, theta, D) : jac_2f(p, theta, D);
}

// ---------------------------------------------------------------------------
// MomentSystem
// ---------------------------------------------------------------------------

Eigen::VectorXd MomentSystem::whiten(const Eigen::VectorXd& x) const {
    return Vhat_llt.matrixL().solve(x);
}

Eigen::MatrixXd MomentSystem::whiten(const Eigen::MatrixXd& x) const {
    return Vhat_llt.matrixL().solve(x);
}

MomentSystem make_moment_system(const Eigen::MatrixXd& data, bool demean) {
    const int n = static_cast<int>(data.rows());
    const int p = static_cast<int>(data.cols());
    const int k = moment_dim(p);
    if (n <= k)
        throw SingularWeightError("make_moment_system: need n > p(p+1)/2 observations");

    Eigen::MatrixXd X = data;
    if (demean) {
        Eigen::RowVectorXd mu = X.colwise().mean();
        X.rowwise() -= mu;
        X *= std::sqrt(static_cast<double>(n) / (n - 1.0));
    }

    // Z_i = vech(x_i x_i'); accumulate mean and scatter in one pass.
    Eigen::MatrixXd Z(n, k);
    for (int i = 0; i < n; ++i) {
        int idx = 0;
        for (int c = 0; c < p; ++c)
            for (int r = c; r < p; ++r) Z(i, idx++) = X(i, r) * X(i, c);
    }
    MomentSystem ms;
    ms.n = n;
    ms.p = p;
    ms.gbar_base = Z.colwise().mean();
    Eigen::MatrixXd Zc = Z.rowwise() - ms.gbar_base.transpose();
    ms.Vhat = Zc.transpose() * Zc / (n - 1.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ms.Vhat);
    const double emin = es.eigenvalues().minCoeff();
    const double emax = es.eigenvalues().maxCoeff();
    if (!(emin > 0.0) || emax / emin > 1e12)
        throw SingularWeightError("make_moment_system: Vhat is numerically singular");
    ms.Vhat_llt.compute(ms.Vhat);
    if (ms.Vhat_llt.info() != Eigen::Success)
        throw SingularWeightError("make_moment_system: Cholesky of Vhat failed");
    return ms;
}

MomentSystem exact_moment_system(int p, const Eigen::VectorXd& gbar_base, int n) {
    if (gbar_base.size() != moment_dim(p))
        throw InvalidParameterError("exact_moment_system: gbar_base has wrong length");
    MomentSystem ms;
    ms.n = n;
    ms.p = p;
    ms.gbar_base = gbar_base;
    ms.Vhat = Eigen::MatrixXd::Identity(moment_dim(p), moment_dim(p));
    ms.Vhat_llt.compute(ms.Vhat);
    return ms;
}

}  // namespace fwid
