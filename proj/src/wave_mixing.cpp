#include "cpw/wave_mixing.hpp"

#include "cpw/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace cpw {

Detunings detunings(const FwmProblem& p) {
    Detunings d;
    d.q = p.omega_p - p.omega_q;
    d.m = p.omega_p - p.omega_m;
    d.w = p.omega_p - p.omega_w;
    d.qm = p.omega_q - p.omega_m;
    d.qw = p.omega_q - p.omega_w;
    d.wm = p.omega_w - p.omega_m;
    return d;
}

const char* regime_str(FwmRegime r) {
    switch (r) {
        case FwmRegime::tls: return "tls";
        case FwmRegime::transmon: return "transmon";
        case FwmRegime::small_alpha: return "small_alpha";
    }
    return "?";
}

double resonant_pump(double omega_q, double omega_m, double omega_w) { return omega_q + omega_w - omega_m; }

namespace {

FwmValidity validity(const FwmProblem& p, const Detunings& d) {
    FwmValidity v;
    const double qw = d.q - d.w, qm = d.q - d.m;
    v.ratio_qw = qw != 0 ? std::abs(p.g_qw / qw) : INFINITY;
    v.ratio_qm = qm != 0 ? std::abs(p.g_qm / qm) : INFINITY;
    v.perturbative = v.ratio_qw <= 0.1 && v.ratio_qm <= 0.1;
    const double scale = 10.0 * std::max({std::abs(p.g_qw), std::abs(p.g_qm), std::abs(p.ep)});
    v.near_two_photon = std::abs(d.qw - p.alpha) <= scale;
    v.weak_drive = d.q != 0 && std::abs(p.ep / d.q) <= 0.1;
    v.small_alpha = d.qw != 0 && std::abs(p.alpha / d.qw) <= 0.1;
    return v;
}

void require_nonzero(double x, const char* what) {
    if (x == 0) throw ResonantDenominator(std::string("resonant denominator: ") + what + " = 0");
}

}  // namespace

FwmAmplitude fwm_amplitude_tls(const FwmProblem& p) {
    Detunings d = detunings(p);
    require_nonzero(d.qm, "Delta_qm");
    require_nonzero(d.wm, "Delta_wm");
    return {2.0 * p.ep * p.g_qw * p.g_qm / (d.qm * d.wm), FwmRegime::tls, validity(p, d)};
}

FwmAmplitude fwm_amplitude_transmon(const FwmProblem& p) {
    Detunings d = detunings(p);
    require_nonzero(d.qw - p.alpha, "Delta_qw - alpha");
    FwmAmplitude a = fwm_amplitude_tls(p);
    // Written as the TLS value times its anharmonic suppression factor.
    a.value *= -p.alpha / (d.qw - p.alpha);
    a.regime = FwmRegime::transmon;
    return a;
}

FwmAmplitude fwm_amplitude_small_alpha(const FwmProblem& p) {
    Detunings d = detunings(p);
    require_nonzero(d.wm, "Delta_wm");
    require_nonzero(d.qw, "Delta_qw");
    require_nonzero(d.qm, "Delta_qm");
    double v = -2.0 * p.alpha * (p.ep / d.wm) * (p.g_qw / d.qw) * (p.g_qm / d.qm);
    return {v, FwmRegime::small_alpha, validity(p, d)};
}

FwmOracleResult fwm_oracle_exact(const FwmProblem& p, std::array<int, 3> cutoffs) {
    const auto [nq, nw, nm] = cutoffs;
    if (nq < 3 || nw < 3 || nm < 3) throw ValidationError("oracle cutoffs must be at least (3, 3, 3)");
    const int dim = nq * nw * nm;
    auto idx = [&](int a, int b, int c) { return (a * nw + b) * nm + c; };
    const Detunings d = detunings(p);

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd drive = Eigen::MatrixXd::Zero(dim, dim);  // q + q^dag
    for (int a = 0; a < nq; ++a)
        for (int b = 0; b < nw; ++b)
            for (int c = 0; c < nm; ++c) {
                const int i = idx(a, b, c);
                h(i, i) = -d.q * a - 0.5 * p.alpha * a * (a - 1) - d.w * b - d.m * c;
                if (a + 1 < nq) {
                    const int up = idx(a + 1, b, c);
                    drive(up, i) = drive(i, up) = std::sqrt(a + 1.0);
                    // g_qw (q^dag w + q w^dag), g_qm (q^dag m + q m^dag)
                    if (b > 0) {
                        const int j = idx(a + 1, b - 1, c);
                        double v = p.g_qw * std::sqrt((a + 1.0) * b);
                        h(j, i) += v;
                        h(i, j) += v;
                    }
                    if (c > 0) {
                        const int j = idx(a + 1, b, c - 1);
                        double v = p.g_qm * std::sqrt((a + 1.0) * c);
                        h(j, i) += v;
                        h(i, j) += v;
                    }
                }
            }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw ConvergenceError("oracle eigensolver failed");
    const Eigen::MatrixXd& u = es.eigenvectors();

    auto dressed = [&](int bare, double& overlap) {
        Eigen::Index col;
        overlap = u.row(bare).cwiseAbs().maxCoeff(&col);
        if (overlap < 0.7)
            throw AssignmentError("dressed state of bare index " + std::to_string(bare) +
                                  " has maximum overlap " + std::to_string(overlap) + " < 0.7");
        Eigen::VectorXd v = u.col(col);
        Eigen::Index big;
        v.cwiseAbs().maxCoeff(&big);
        if (v[big] < 0) v = -v;
        return v;
    };
    FwmOracleResult r;
    r.cutoffs = cutoffs;
    Eigen::VectorXd v001 = dressed(idx(0, 0, 1), r.overlap_001);
    Eigen::VectorXd v110 = dressed(idx(1, 1, 0), r.overlap_110);
    r.overlap = p.ep * v110.dot(drive * v001);
    r.coeff_200 = v110[idx(2, 0, 0)];
    return r;
}

double raman_rate(double ep, double alpha) {
    if (alpha == 0) throw DivisionByZero("Raman rate needs alpha != 0");
    return std::sqrt(2.0) * ep * ep / (2.0 * std::abs(alpha / 2.0));
}

namespace {

double saturation_law(double x, double a, double b) { return a * b * x * x / (1.0 + b * x * x); }

void check_curve_constants(double a, double b) {
    if (!(a > 0 && a <= 1)) throw DomainError("saturation amplitude A must lie in (0, 1]");
    if (!(b > 0)) throw DomainError("saturation constant B must be positive");
}

}  // namespace

SaturationCurve saturation_pee(const std::vector<double>& ep_grid, double a, double b) {
    check_curve_constants(a, b);
    SaturationCurve c;
    c.drive = ep_grid;
    c.a = a;
    c.b = b;
    for (double e : ep_grid) c.p_ee.push_back(saturation_law(e, a, b));
    return c;
}

SaturationCurve saturation_pff(const std::vector<double>& ep_grid, double a, double b, double alpha) {
    check_curve_constants(a, b);
    SaturationCurve c;
    c.drive = ep_grid;
    c.a = a;
    c.b = b;
    for (double e : ep_grid) c.p_ff.push_back(saturation_law(raman_rate(e, alpha), a, b));
    return c;
}

LindbladResult lindblad_steady_state(double ep, double detuning, double alpha, double gamma_e, double gamma_f) {
    if (!(gamma_e > 0) || !(gamma_f > 0)) throw DomainError("decay rates must be positive");
    using Cd = std::complex<double>;
    using Mat = Eigen::Matrix3cd;
    const Cd i1(0, 1);
    Mat h = Mat::Zero();
    h(1, 1) = -detuning;
    h(2, 2) = -2.0 * detuning - alpha;
    h(0, 1) = h(1, 0) = ep;
    h(1, 2) = h(2, 1) = std::sqrt(2.0) * ep;
    Mat le = Mat::Zero(), lf = Mat::Zero();
    le(0, 1) = std::sqrt(gamma_e);
    lf(1, 2) = std::sqrt(gamma_f);

    // Column-stacked vec: vec(A rho B) = (B^T kron A) vec(rho).
    const Mat id = Mat::Identity();
    auto kron = [](const Mat& a, const Mat& b) {
        Eigen::Matrix<Cd, 9, 9> k;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) k.block<3, 3>(3 * r, 3 * c) = a(r, c) * b;
        return k;
    };
    Eigen::Matrix<Cd, 9, 9> liou = -i1 * (kron(id, h) - kron(h.transpose(), id));
    for (const Mat* l : {&le, &lf}) {
        Mat ldl = l->adjoint() * *l;
        liou += kron(l->conjugate(), *l) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id);
    }
    Eigen::JacobiSVD<Eigen::Matrix<Cd, 9, 9>> svd(liou);
    const auto& sv = svd.singularValues();
    if (sv[7] <= 1e-12 * sv[0]) throw SingularLiouvillian("steady state is not unique (null space > 1)");

    // Replace one equation by the trace condition.
    Eigen::Matrix<Cd, 9, 9> a = liou;
    Eigen::Matrix<Cd, 9, 1> rhs = Eigen::Matrix<Cd, 9, 1>::Zero();
    a.row(0).setZero();
    for (int k = 0; k < 3; ++k) a(0, 4 * k) = 1.0;
    rhs[0] = 1.0;
    Eigen::Matrix<Cd, 9, 1> rho = a.fullPivLu().solve(rhs);
    LindbladResult r;
    r.p_gg = rho[0].real();
    r.p_ee = rho[4].real();
    r.p_ff = rho[8].real();
    r.trace = r.p_gg + r.p_ee + r.p_ff;
    return r;
}

SaturationFit fit_saturation(const std::vector<double>& x, const std::vector<double>& p) {
    if (x.size() != p.size() || x.size() < 3) throw FitError("saturation fit needs >= 3 matched points");
    // 1/P = c0 + c1 u with u = 1/x^2; weighting each row by P turns the
    // residual into a relative error of P.
    Eigen::MatrixXd m(x.size(), 2);
    Eigen::VectorXd y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(p[i] > 0)) throw FitError("saturation fit needs positive drives and populations");
        m(i, 0) = p[i];
        m(i, 1) = p[i] / (x[i] * x[i]);
        y[i] = 1.0;
    }
    Eigen::Vector2d c = m.colPivHouseholderQr().solve(y);
    if (!(c[0] > 0) || !(c[1] > 0)) throw FitError("saturation fit produced non-positive constants");
    SaturationFit f;
    f.a = 1.0 / c[0];
    f.b = c[0] / c[1];
    double s = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double r = saturation_law(x[i], f.a, f.b) / p[i] - 1.0;
        s += r * r;
    }
    f.rms_relative = std::sqrt(s / static_cast<double>(x.size()));
    return f;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw FitError("slope fit needs >= 2 matched points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw FitError("log-log slope needs positive data");
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double den = n * sxx - sx * sx;
    if (den == 0) throw FitError("log-log slope needs distinct x values");
    return (n * sxy - sx * sy) / den;
}

}  // namespace cpw
