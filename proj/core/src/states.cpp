#include "subrad/states.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subrad/basis.hpp"
#include "subrad/errors.hpp"
#include "subrad/rng.hpp"

namespace subrad {

namespace {

void check_dense_capacity(int n) {
    if (n < 1) throw DomainError("need at least one atom");
    if (n > kDenseAtomCap)
        throw CapacityError("dense state vectors support at most " + std::to_string(kDenseAtomCap) +
                            " atoms, got " + std::to_string(n));
}

} // namespace

ExcitationSet ExcitationSet::make(int n_atoms, std::vector<int> indices) {
    if (n_atoms < 1) throw DomainError("excitation set needs at least one atom");
    std::sort(indices.begin(), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= n_atoms)
            throw DomainError("excited atom " + std::to_string(indices[i]) + " out of range");
        if (i > 0 && indices[i] == indices[i - 1])
            throw DomainError("excited atom " + std::to_string(indices[i]) + " listed twice");
    }
    return ExcitationSet{n_atoms, std::move(indices)};
}

bool ExcitationSet::contains(int atom) const {
    return std::binary_search(indices.begin(), indices.end(), atom);
}

std::uint32_t ExcitationSet::mask() const {
    std::uint32_t m = 0;
    for (int i : indices) m |= 1u << i;
    return m;
}

CumulantState::CumulantState(int n_atoms)
    : n_(n_atoms),
      n2_(static_cast<std::size_t>(n_atoms) * n_atoms),
      n3_(static_cast<std::size_t>(n_atoms) * n_atoms * n_atoms),
      data_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(storage_size(n_atoms)))) {
    if (n_atoms < 1) throw DomainError("cumulant state needs at least one atom");
    if (n_atoms > kCumulantAtomCap)
        throw CapacityError("cumulant backend supports at most " + std::to_string(kCumulantAtomCap) +
                            " atoms, got " + std::to_string(n_atoms));
}

std::size_t CumulantState::storage_size(int n) {
    const std::size_t m = static_cast<std::size_t>(n);
    return m + 2 * m * m + 2 * m * m * m;
}

double CumulantState::excited_population() const {
    double p = 0.0;
    for (int i = 0; i < n_; ++i) p += pop(i);
    return p;
}

int atom_count(const QuantumState& state) {
    return std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CumulantState>)
                return s.n_atoms();
            else
                return s.n_atoms;
        },
        state);
}

PureState coherent_spin_state(const ArrayGeometry& geometry, double n_exc, const Vec3& k) {
    if (!(n_exc >= 0.0 && n_exc <= 1.0)) throw DomainError("n_exc must lie in [0, 1]");
    if (!(k.norm() < kResonantWavenumber)) throw DomainError("k must lie inside the light cone");
    const int n = geometry.size();
    check_dense_capacity(n);
    const double ag = std::sqrt(1.0 - n_exc);
    const double ae = std::sqrt(n_exc);
    std::vector<cplx> excited_amp(n);
    for (int a = 0; a < n; ++a) excited_amp[a] = std::polar(ae, k.dot(geometry.positions[a]));

    const std::uint32_t dim = 1u << n;
    PureState s{n, Eigen::VectorXcd(dim)};
    for (std::uint32_t b = 0; b < dim; ++b) {
        cplx amp = 1.0;
        for (int a = 0; a < n; ++a) amp *= excited(b, a) ? excited_amp[a] : cplx(ag);
        s.amplitudes[b] = amp;
    }
    return s;
}

PureState incoherent_product_state(const ExcitationSet& excitations) {
    check_dense_capacity(excitations.n_atoms);
    PureState s{excitations.n_atoms, Eigen::VectorXcd::Zero(1u << excitations.n_atoms)};
    s.amplitudes[excitations.mask()] = 1.0;
    return s;
}

ExcitationSet checkerboard_set(const ArrayGeometry& geometry) {
    std::vector<int> idx;
    const int n = geometry.size();
    for (int a = 0; a < n; ++a) {
        int parity = a;
        if (geometry.dimensionality == 2 && !geometry.counts.empty()) {
            const int nx = geometry.counts[0];
            parity = a % nx + a / nx;
        }
        if (parity % 2 == 0) idx.push_back(a);
    }
    return ExcitationSet::make(n, std::move(idx));
}

std::vector<ExcitationSet> random_excitation_sets(int n_atoms, int n_exc, int count,
                                                  std::uint64_t seed) {
    if (n_atoms < 1) throw DomainError("need at least one atom");
    if (n_exc < 0 || n_exc > n_atoms) throw DomainError("n_exc must lie in [0, N]");
    if (count < 1) throw DomainError("count must be at least 1");
    std::vector<ExcitationSet> out;
    out.reserve(count);
    for (int c = 0; c < count; ++c) {
        rng::Stream stream(rng::derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::vector<int> perm(n_atoms);
        for (int i = 0; i < n_atoms; ++i) perm[i] = i;
        // Partial Fisher-Yates: the first n_exc entries form the subset.
        for (int i = 0; i < n_exc; ++i) {
            const int j = i + static_cast<int>(stream.below(static_cast<std::uint64_t>(n_atoms - i)));
            std::swap(perm[i], perm[j]);
        }
        perm.resize(n_exc);
        out.push_back(ExcitationSet::make(n_atoms, std::move(perm)));
    }
    return out;
}

DensityState to_density(const PureState& state) {
    return DensityState{state.n_atoms, state.amplitudes * state.amplitudes.adjoint()};
}

CumulantState to_cumulant(const ExcitationSet& e) {
    CumulantState s(e.n_atoms);
    const int n = e.n_atoms;
    std::vector<char> on(n, 0);
    for (int i : e.indices) on[i] = 1;
    for (int i = 0; i < n; ++i) {
        if (!on[i]) continue;
        s.pop_ref(i) = 1.0;
        for (int j = 0; j < n; ++j) {
            if (j == i || !on[j]) continue;
            s.pp_ref(i, j) = 1.0;
            for (int k = 0; k < n; ++k)
                if (k != i && k != j && on[k]) s.ppp_ref(i, j, k) = 1.0;
        }
    }
    return s;
}

CumulantState to_cumulant(const PureState& state) {
    Eigen::Index peak = 0;
    state.amplitudes.cwiseAbs2().maxCoeff(&peak);
    const double rest = state.amplitudes.squaredNorm() - std::norm(state.amplitudes[peak]);
    if (rest > 1e-20 || std::abs(std::abs(state.amplitudes[peak]) - 1.0) > 1e-10)
        throw UnsupportedState(
            "the cumulant backend only accepts incoherent product states (computational basis states)");
    std::vector<int> idx;
    for (int a = 0; a < state.n_atoms; ++a)
        if (excited(static_cast<std::uint32_t>(peak), a)) idx.push_back(a);
    return to_cumulant(ExcitationSet::make(state.n_atoms, std::move(idx)));
}

double norm_error(const PureState& state) { return std::abs(state.amplitudes.norm() - 1.0); }

double hermiticity_error(const DensityState& state) {
    return (state.matrix - state.matrix.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const DensityState& state) {
    const Eigen::MatrixXcd h = 0.5 * (state.matrix + state.matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace subrad
