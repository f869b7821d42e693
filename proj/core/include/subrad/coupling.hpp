#pragma once

#include <vector>

#include "subrad/types.hpp"

namespace subrad {

/// Emitter positions (in units of the transition wavelength) and the shared
/// transition dipole orientation.
struct ArrayGeometry {
    std::vector<Vec3> positions;
    double lattice_constant = 0.0;
    int dimensionality = 1;
    std::vector<int> counts;  // sites per axis for generated lattices; empty otherwise
    CVec3 dipole = CVec3(0.0, 0.0, 1.0);

    int size() const { return static_cast<int>(positions.size()); }

    // Throws InvalidGeometry on coincident emitters, a non-unit dipole or
    // inconsistent lattice metadata.
    void validate() const;
};

/// Linear polarization perpendicular to the chain axis (x) and to the
/// lattice plane (xy).
CVec3 default_dipole();

/// Evenly spaced chain along x (dimensionality 1, counts = {N}) or square
/// lattice in the xy-plane (dimensionality 2, counts = {nx, ny}). Site n of a
/// 2D lattice sits at (n % nx, n / nx) * a.
ArrayGeometry build_lattice(int dimensionality, const std::vector<int>& counts, double a,
                            const CVec3& dipole = default_dipole());

/// Free-space point-dipole Green's tensor without the contact term.
/// Throws DomainError when |r| = 0.
Eigen::Matrix3cd greens_tensor(const Vec3& r, double k);

/// Coherent (J) and dissipative (Gamma) dipole-dipole couplings in units of
/// the single-atom decay rate. J has a zero diagonal, Gamma a unit diagonal.
struct CouplingMatrices {
    Eigen::MatrixXd J;
    Eigen::MatrixXd Gamma;

    int size() const { return static_cast<int>(J.rows()); }
};

CouplingMatrices coupling_matrices(const ArrayGeometry& geometry);

/// Smallest eigenvalue of Gamma.
double min_gamma_eigenvalue(const CouplingMatrices& couplings);

} // namespace subrad
