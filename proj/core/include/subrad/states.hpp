#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "subrad/coupling.hpp"
#include "subrad/types.hpp"

namespace subrad {

/// Atoms that start out excited, stored sorted.
struct ExcitationSet {
    int n_atoms = 0;
    std::vector<int> indices;

    // Sorts the indices and throws DomainError on duplicates or out-of-range entries.
    static ExcitationSet make(int n_atoms, std::vector<int> indices);

    int count() const { return static_cast<int>(indices.size()); }
    bool contains(int atom) const;
    std::uint32_t mask() const;  // basis index of the product state; requires n_atoms <= 32
};

/// Amplitudes over the product basis (atom 0 least significant, bit set = excited).
struct PureState {
    int n_atoms = 0;
    Eigen::VectorXcd amplitudes;
};

struct DensityState {
    int n_atoms = 0;
    Eigen::MatrixXcd matrix;
};

/// Moments of an incoherent-sector state up to third order:
///   pop(i)       = <s_i^ee>
///   coh(i,j)     = <s_i^eg s_j^ge>        i != j
///   pp(i,j)      = <s_i^ee s_j^ee>        i != j
///   pcoh(i,j,k)  = <s_i^ee s_j^eg s_k^ge> i,j,k distinct
///   ppp(i,j,k)   = <s_i^ee s_j^ee s_k^ee> i,j,k distinct
/// Everything lives in one flat complex vector so the state can be handed
/// to the ODE integrator directly; entries with repeated indices stay zero.
class CumulantState {
public:
    CumulantState() = default;
    explicit CumulantState(int n_atoms);

    int n_atoms() const { return n_; }
    static std::size_t storage_size(int n_atoms);

    double pop(int i) const { return data_[i].real(); }
    cplx coh(int i, int j) const { return data_[coh_at(i, j)]; }
    double pp(int i, int j) const { return data_[pp_at(i, j)].real(); }
    cplx pcoh(int i, int j, int k) const { return data_[pcoh_at(i, j, k)]; }
    double ppp(int i, int j, int k) const { return data_[ppp_at(i, j, k)].real(); }

    cplx& pop_ref(int i) { return data_[i]; }
    cplx& coh_ref(int i, int j) { return data_[coh_at(i, j)]; }
    cplx& pp_ref(int i, int j) { return data_[pp_at(i, j)]; }
    cplx& pcoh_ref(int i, int j, int k) { return data_[pcoh_at(i, j, k)]; }
    cplx& ppp_ref(int i, int j, int k) { return data_[ppp_at(i, j, k)]; }

    std::size_t coh_at(int i, int j) const { return n_ + static_cast<std::size_t>(i) * n_ + j; }
    std::size_t pp_at(int i, int j) const { return n_ + n2_ + static_cast<std::size_t>(i) * n_ + j; }
    std::size_t pcoh_at(int i, int j, int k) const {
        return n_ + 2 * n2_ + (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }
    std::size_t ppp_at(int i, int j, int k) const {
        return n_ + 2 * n2_ + n3_ + (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }

    Eigen::VectorXcd& data() { return data_; }
    const Eigen::VectorXcd& data() const { return data_; }

    double excited_population() const;

private:
    int n_ = 0;
    std::size_t n2_ = 0;
    std::size_t n3_ = 0;
    Eigen::VectorXcd data_;
};

using QuantumState = std::variant<PureState, DensityState, CumulantState>;

int atom_count(const QuantumState& state);

/// prod_n (sqrt(1-n_exc)|g_n> + exp(i k.r_n) sqrt(n_exc)|e_n>). k is in units
/// of 1/wavelength; |k| must lie inside the light cone (|k| < 2 pi) or be zero.
PureState coherent_spin_state(const ArrayGeometry& geometry, double n_exc,
                              const Vec3& k = Vec3::Zero());

/// Computational basis state with exactly the atoms in `excitations` excited.
PureState incoherent_product_state(const ExcitationSet& excitations);

/// Every second site excited: even index for chains, even (row + column)
/// parity for square lattices.
ExcitationSet checkerboard_set(const ArrayGeometry& geometry);

/// `count` subsets of size n_exc, each drawn uniformly without replacement.
/// The sequence depends only on (n_atoms, n_exc, count, seed).
std::vector<ExcitationSet> random_excitation_sets(int n_atoms, int n_exc, int count,
                                                  std::uint64_t seed);

DensityState to_density(const PureState& state);

/// Moments of the product state: populations and population products are 1
/// on the excited set, every coherence-type moment is 0.
CumulantState to_cumulant(const ExcitationSet& excitations);

/// Accepts computational basis states only; anything carrying coherences
/// throws UnsupportedState.
CumulantState to_cumulant(const PureState& state);

// Validation helpers used by tests and the harness.
double norm_error(const PureState& state);
double hermiticity_error(const DensityState& state);
double min_eigenvalue(const DensityState& state);

} // namespace subrad
