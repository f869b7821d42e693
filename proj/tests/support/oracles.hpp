#pragma once

// Independent reference implementations used only by tests: Kronecker-product
// operators on the full Hilbert space and a dense Lindblad generator built
// from them. Nothing here shares code with the library kernels.

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "subrad/cumulant.hpp"
#include "subrad/model.hpp"
#include "subrad/states.hpp"

namespace oracle {

using subrad::cplx;
using Mat = Eigen::MatrixXcd;

// Single-site operator embedded at `atom`; atom 0 is the least significant
// factor, so it sits rightmost in the Kronecker product.
inline Mat site_op(int n_atoms, int atom, const Eigen::Matrix2cd& op) {
    Mat out = Mat::Identity(1, 1);
    for (int a = n_atoms - 1; a >= 0; --a) {
        const Mat f = a == atom ? Mat(op) : Mat(Mat::Identity(2, 2));
        Mat next(out.rows() * 2, out.cols() * 2);
        for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < out.cols(); ++j) next.block(2 * i, 2 * j, 2, 2) = out(i, j) * f;
        out = next;
    }
    return out;
}

// Local basis: index 0 = g, 1 = e.
inline Eigen::Matrix2cd local(subrad::SpinOp op) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    switch (op) {
    case subrad::SpinOp::Excited: m(1, 1) = 1.0; break;
    case subrad::SpinOp::Raise: m(1, 0) = 1.0; break;
    case subrad::SpinOp::Lower: m(0, 1) = 1.0; break;
    }
    return m;
}

inline Mat raise(int n, int a) { return site_op(n, a, local(subrad::SpinOp::Raise)); }
inline Mat lower(int n, int a) { return site_op(n, a, local(subrad::SpinOp::Lower)); }
inline Mat excited(int n, int a) { return site_op(n, a, local(subrad::SpinOp::Excited)); }

inline Mat hamiltonian(const subrad::SystemModel& m) {
    const int n = m.size();
    const int d = 1 << n;
    Mat h = Mat::Zero(d, d);
    for (int a = 0; a < n; ++a) {
        h += m.detuning(a) * excited(n, a);
        h += m.rabi * (raise(n, a) + lower(n, a));
        for (int b = 0; b < n; ++b)
            if (a != b) h += m.J(a, b) * raise(n, a) * lower(n, b);
    }
    return h;
}

// -i[H, rho] + sum_nm Gamma_nm (s_m^- rho s_n^+ - {s_n^+ s_m^-, rho}/2)
inline Mat lindblad(const subrad::SystemModel& m, const Mat& rho) {
    const int n = m.size();
    const Mat h = hamiltonian(m);
    Mat out = -cplx(0, 1) * (h * rho - rho * h);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double g = m.Gamma(a, b);
            if (g == 0.0) continue;
            const Mat sp = raise(n, a), sm = lower(n, b);
            out += g * (sm * rho * sp - 0.5 * (sp * sm * rho + rho * sp * sm));
        }
    return out;
}

inline Mat heff(const subrad::SystemModel& m) {
    const int n = m.size();
    Mat h = hamiltonian(m);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) h -= cplx(0, 0.5) * m.Gamma(a, b) * raise(n, a) * lower(n, b);
    return h;
}

inline cplx expect(const Mat& rho, const Mat& op) { return (rho * op).trace(); }

inline Mat product(int n, const std::vector<subrad::OpLabel>& ops) {
    Mat p = Mat::Identity(1 << n, 1 << n);
    for (const auto& o : ops) p = p * site_op(n, o.atom, local(o.op));
    return p;
}

// Exact moment families of a (not necessarily normalized) operator.
inline subrad::CumulantState moments(int n, const Mat& rho) {
    using subrad::SpinOp;
    subrad::CumulantState s(n);
    for (int i = 0; i < n; ++i) {
        s.pop_ref(i) = expect(rho, excited(n, i));
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            s.coh_ref(i, j) = expect(rho, raise(n, i) * lower(n, j));
            s.pp_ref(i, j) = expect(rho, excited(n, i) * excited(n, j));
            for (int k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                s.pcoh_ref(i, j, k) = expect(rho, excited(n, i) * raise(n, j) * lower(n, k));
                s.ppp_ref(i, j, k) = expect(rho, excited(n, i) * excited(n, j) * excited(n, k));
            }
        }
    }
    return s;
}

// Exact fourth-order products of a density matrix.
class ExactFourth final : public subrad::FourthMomentProvider {
public:
    ExactFourth(int n, const Mat& rho) : n_(n), rho_(rho) {}
    cplx ssss(int a, int b, int c, int d) const override {
        return expect(rho_, raise(n_, a) * lower(n_, b) * raise(n_, c) * lower(n_, d));
    }
    cplx ppss(int a, int b, int c, int d) const override {
        return expect(rho_, excited(n_, a) * excited(n_, b) * raise(n_, c) * lower(n_, d));
    }

private:
    int n_;
    Mat rho_;
};

// Random density matrix that commutes with the total excitation number.
inline Mat random_manifold_diagonal_rho(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    const int d = 1 << n;
    Mat a = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (__builtin_popcount(i) == __builtin_popcount(j)) a(i, j) = cplx(g(rng), g(rng));
    Mat rho = a * a.adjoint();
    return rho / rho.trace();
}

inline Mat random_density(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    const int d = 1 << n;
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
    Mat rho = a * a.adjoint();
    return rho / rho.trace();
}

// Dense superoperator of the Lindblad generator acting on column-stacked
// density matrices.
inline Mat superoperator(const subrad::SystemModel& m) {
    const int d = 1 << m.size();
    Mat s(d * d, d * d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
            Mat e = Mat::Zero(d, d);
            e(i, j) = 1.0;
            const Mat l = lindblad(m, e);
            s.col(j * d + i) = Eigen::Map<const Eigen::VectorXcd>(l.data(), d * d);
        }
    return s;
}

// Literal transcription of the fourth-order closure, all fourteen products
// spelled out.
inline cplx literal_closure(const std::array<subrad::OpLabel, 4>& o, const subrad::CumulantState& s) {
    using subrad::stored_moment;
    auto m1 = [&](int a) { return stored_moment({o[a]}, s); };
    auto m2 = [&](int a, int b) { return stored_moment({o[a], o[b]}, s); };
    auto m3 = [&](int a, int b, int c) { return stored_moment({o[a], o[b], o[c]}, s); };
    return m1(0) * m3(1, 2, 3) + m1(1) * m3(0, 2, 3) + m1(2) * m3(0, 1, 3) + m1(3) * m3(0, 1, 2) +
           m2(0, 1) * m2(2, 3) + m2(0, 2) * m2(1, 3) + m2(0, 3) * m2(1, 2) -
           2.0 * (m1(0) * m1(1) * m2(2, 3) + m1(0) * m1(2) * m2(1, 3) + m1(0) * m1(3) * m2(1, 2) +
                  m1(1) * m1(2) * m2(0, 3) + m1(1) * m1(3) * m2(0, 2) + m1(2) * m1(3) * m2(0, 1)) +
           6.0 * m1(0) * m1(1) * m1(2) * m1(3);
}

// Couplings of two dipoles perpendicular to their separation, closed form in
// x = k r.
inline double perpendicular_gamma(double x) {
    return 1.5 * (std::sin(x) / x + std::cos(x) / (x * x) - std::sin(x) / (x * x * x));
}
inline double perpendicular_j(double x) {
    return -0.75 * (std::cos(x) / x - std::sin(x) / (x * x) - std::cos(x) / (x * x * x));
}

} // namespace oracle
