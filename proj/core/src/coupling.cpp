#include "subrad/coupling.hpp"

#include <cmath>
#include <string>

#include "subrad/errors.hpp"

namespace subrad {

namespace {

Vec3 grid_point(const ArrayGeometry& g, int n) {
    if (g.dimensionality == 1) return Vec3(n * g.lattice_constant, 0.0, 0.0);
    const int nx = g.counts[0];
    return Vec3((n % nx) * g.lattice_constant, (n / nx) * g.lattice_constant, 0.0);
}

} // namespace

CVec3 default_dipole() { return CVec3(0.0, 0.0, 1.0); }

void ArrayGeometry::validate() const {
    if (positions.empty()) throw InvalidGeometry("geometry has no emitters");
    if (dimensionality != 1 && dimensionality != 2)
        throw InvalidGeometry("dimensionality must be 1 or 2");
    if (std::abs(dipole.norm() - 1.0) > 1e-12)
        throw InvalidGeometry("dipole orientation must be a unit vector");

    if (!counts.empty()) {
        if (static_cast<int>(counts.size()) != dimensionality)
            throw InvalidGeometry("counts must have one entry per axis");
        long expected = 1;
        for (int c : counts) expected *= c;
        if (expected != size()) throw InvalidGeometry("counts do not match the number of positions");
        if (!(lattice_constant > 0.0)) throw InvalidGeometry("lattice constant must be positive");
        for (int n = 0; n < size(); ++n) {
            if ((positions[n] - grid_point(*this, n)).norm() > 1e-12)
                throw InvalidGeometry("site " + std::to_string(n) + " is off the declared grid");
        }
    }

    for (int n = 0; n < size(); ++n)
        for (int m = n + 1; m < size(); ++m)
            if (!((positions[n] - positions[m]).norm() > 0.0))
                throw InvalidGeometry("emitters " + std::to_string(n) + " and " + std::to_string(m) +
                                      " coincide");
}

ArrayGeometry build_lattice(int dimensionality, const std::vector<int>& counts, double a,
                            const CVec3& dipole) {
    if (dimensionality != 1 && dimensionality != 2)
        throw InvalidGeometry("dimensionality must be 1 or 2");
    if (static_cast<int>(counts.size()) != dimensionality)
        throw InvalidGeometry("counts must have one entry per axis");
    for (int c : counts)
        if (c < 1) throw InvalidGeometry("every axis needs at least one site");
    if (!(a > 0.0)) throw InvalidGeometry("lattice constant must be positive");

    ArrayGeometry g;
    g.dimensionality = dimensionality;
    g.counts = counts;
    g.lattice_constant = a;
    g.dipole = dipole;
    const int total = dimensionality == 1 ? counts[0] : counts[0] * counts[1];
    g.positions.reserve(total);
    for (int n = 0; n < total; ++n) g.positions.push_back(grid_point(g, n));
    g.validate();
    return g;
}

Eigen::Matrix3cd greens_tensor(const Vec3& r, double k) {
    const double rn = r.norm();
    if (!(rn > 0.0)) throw DomainError("Green's tensor is singular at r = 0");
    const double kr = k * rn;
    const cplx pre = std::exp(kI * kr) / (4.0 * kPi * rn);
    const cplx diag = 1.0 + kI / kr - 1.0 / (kr * kr);
    const cplx dyad = -1.0 - 3.0 * kI / kr + 3.0 / (kr * kr);
    const Vec3 rhat = r / rn;
    Eigen::Matrix3cd G = diag * Eigen::Matrix3cd::Identity();
    G += dyad * (rhat * rhat.transpose()).cast<cplx>();
    return pre * G;
}

CouplingMatrices coupling_matrices(const ArrayGeometry& geometry) {
    geometry.validate();
    const int n = geometry.size();
    const double k = kResonantWavenumber;
    CouplingMatrices c;
    c.J = Eigen::MatrixXd::Zero(n, n);
    c.Gamma = Eigen::MatrixXd::Identity(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const Eigen::Matrix3cd G = greens_tensor(geometry.positions[a] - geometry.positions[b], k);
            // J - i Gamma/2 = -(3 pi / k) d^dagger G d
            const cplx value = -(3.0 * kPi / k) * geometry.dipole.dot(G * geometry.dipole);
            c.J(a, b) = c.J(b, a) = value.real();
            c.Gamma(a, b) = c.Gamma(b, a) = -2.0 * value.imag();
        }
    }
    return c;
}

double min_gamma_eigenvalue(const CouplingMatrices& couplings) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(couplings.Gamma, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace subrad
