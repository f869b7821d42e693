#pragma once

#include <array>
#include <string>
#include <vector>

#include "subrad/lindblad.hpp"
#include "subrad/states.hpp"

namespace subrad {

enum class SpinOp {
    Excited,  // s^ee
    Raise,    // s^eg
    Lower,    // s^ge
};

struct OpLabel {
    int atom;
    SpinOp op;
};

/// Expectation value of a product of one to three single-atom operators on
/// distinct atoms, read from the stored moment families (zero for products
/// outside the incoherent sector, e.g. <s^eg> or <s^ee s^eg>).
cplx stored_moment(const std::vector<OpLabel>& ops, const CumulantState& state);

/// Fourth-order product expanded in lower moments by setting its joint
/// cumulant to zero:
///   <ABCD> = sum <A><BCD> + sum <AB><CD> - 2 sum <A><B><CD> + 6 <A><B><C><D>
/// Throws ConsistencyError if two labels share an atom.
cplx cumulant_closure(const std::array<OpLabel, 4>& ops, const CumulantState& state);

/// Source of the two fourth-order products the equations of motion need:
///   ssss(a,b,c,d) = <s_a^+ s_b^- s_c^+ s_d^->
///   ppss(a,b,c,d) = <s_a^ee s_b^ee s_c^+ s_d^->
/// for pairwise distinct atoms. The default is the closure; tests plug in
/// exact values.
class FourthMomentProvider {
public:
    virtual ~FourthMomentProvider() = default;
    virtual cplx ssss(int a, int b, int c, int d) const = 0;
    virtual cplx ppss(int a, int b, int c, int d) const = 0;
};

/// Time derivative of every moment family. Requires an undriven model with
/// unit self-decay (Gamma_nn = 1).
CumulantState cumulant_rhs(const SystemModel& model, const CumulantState& state);
CumulantState cumulant_rhs(const SystemModel& model, const CumulantState& state,
                           const FourthMomentProvider& fourth);

/// gamma_tot = sum_i Gamma_ii pop_i + sum_{i != j} Gamma_ij Re coh_ij
double cumulant_emission_rate(const SystemModel& model, const CumulantState& state);

struct CumulantEvolution {
    std::vector<double> snapshot_times;
    std::vector<CumulantState> snapshots;
    ObservableSeries series;
    OdeStats stats;
    std::vector<std::string> warnings;
    double max_population_excursion = 0.0;  // distance of any pop_i outside [0, 1]
    double max_cauchy_schwarz_excess = 0.0;  // max(|coh_ij|^2 - pop_i pop_j)
};

/// Integrates the closed moment equations. Populations leaving
/// [-1e-3, 1 + 1e-3] are reported in `warnings` and the series metadata,
/// never clipped.
CumulantEvolution evolve_cumulant(const SystemModel& model, const CumulantState& state0,
                                  const std::vector<double>& time_grid, const Tolerances& tol = {},
                                  const EvolveOptions& options = {});

} // namespace subrad
