#pragma once

#include "subrad/coupling.hpp"

namespace subrad {

/// Generator of the dynamics in the frame rotating at the atomic transition
/// frequency: couplings, per-atom detunings and a global real Rabi drive.
struct SystemModel {
    CouplingMatrices couplings;
    Eigen::VectorXd detunings;  // empty means all zero
    double rabi = 0.0;
    bool coherent_interactions = true;  // false forces J = 0, Gamma untouched

    SystemModel() = default;
    explicit SystemModel(CouplingMatrices c) : couplings(std::move(c)) {}

    int size() const { return couplings.size(); }
    bool driven() const { return rabi != 0.0; }
    double detuning(int n) const { return detunings.size() == 0 ? 0.0 : detunings[n]; }
    double J(int n, int m) const { return coherent_interactions ? couplings.J(n, m) : 0.0; }
    double Gamma(int n, int m) const { return couplings.Gamma(n, m); }
    // J_nm - i Gamma_nm / 2
    cplx G(int n, int m) const { return cplx(J(n, m), -0.5 * Gamma(n, m)); }

    // Throws DimensionMismatch / DomainError on inconsistent fields.
    void validate() const;
};

} // namespace subrad
