#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subrad/observables.hpp"
#include "subrad/spectral.hpp"

namespace subrad::harness {

/// Shortest decimal string that parses back to the same double; "nan",
/// "inf" and "-inf" for non-finite values. Locale independent.
std::string format_number(double x);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> comments;  // "# ..." lines preceding the header, without the marker

    int column(const std::string& name) const;  // -1 when absent
    std::vector<double> values(const std::string& name) const;
};

void write_csv(const std::string& path, const CsvTable& table);
/// Reads files produced by write_csv. Throws Error on malformed input.
CsvTable read_csv(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);

/// t, p_exc, gamma_tot, gamma_inst [, p_exc_err, gamma_tot_err, gamma_inst_err]
CsvTable series_table(const ObservableSeries& series);
/// Rows n, columns m{k}_re / m{k}_im for <s_n^+ s_m^->.
CsvTable correlation_table(const CorrelationSnapshot& snapshot);
/// t, O_0 .. O_N
CsvTable overlap_table(const OverlapSeries& overlaps);
/// t, manifold, state, energy, decay_rate, overlap
CsvTable state_overlap_table(const OverlapSeries& overlaps, const ManifoldSpectrum& spectrum);
/// omega, S_total [, S_0 .. S_{N-1}] with t', tau_max and residual as comment metadata.
CsvTable spectrum_table(const SpectrumResult& spectrum);

} // namespace subrad::harness
