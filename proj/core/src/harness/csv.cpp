#include "subrad/harness/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "subrad/errors.hpp"

namespace subrad::harness {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

double parse_number(const std::string& s, const std::string& where) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error(where + ": not a number: '" + s + "'");
    return x;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<double> CsvTable::values(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw Error("no column '" + name + "'");
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[c]);
    return v;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    for (const auto& c : table.comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw DimensionMismatch("row width differs from header in " + path);
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
        out << '\n';
    }
    if (!out) throw Error("write failed for " + path);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.rfind("# ", 0) == 0) {
            if (!t.header.empty()) throw Error(path + ": comment after header");
            t.comments.push_back(line.substr(2));
            continue;
        }
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw Error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " cells");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_number(c, path + ":" + std::to_string(lineno)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

CsvTable series_table(const ObservableSeries& s) {
    CsvTable t;
    t.header = {"t", "p_exc", "gamma_tot", "gamma_inst"};
    const bool err = s.has_errors();
    if (err) t.header.insert(t.header.end(), {"p_exc_err", "gamma_tot_err", "gamma_inst_err"});
    for (std::size_t k = 0; k < s.size(); ++k) {
        std::vector<double> row{s.times[k], s.p_exc[k], s.gamma_tot[k], s.gamma_inst[k]};
        if (err) row.insert(row.end(), {s.p_exc_err[k], s.gamma_tot_err[k], s.gamma_inst_err[k]});
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable correlation_table(const CorrelationSnapshot& snap) {
    CsvTable t;
    t.comments.push_back("t=" + format_number(snap.time));
    t.header.push_back("n");
    const auto n = snap.matrix.cols();
    for (Eigen::Index m = 0; m < n; ++m) {
        t.header.push_back("m" + std::to_string(m) + "_re");
        t.header.push_back("m" + std::to_string(m) + "_im");
    }
    for (Eigen::Index r = 0; r < snap.matrix.rows(); ++r) {
        std::vector<double> row{static_cast<double>(r)};
        for (Eigen::Index m = 0; m < n; ++m) {
            row.push_back(snap.matrix(r, m).real());
            row.push_back(snap.matrix(r, m).imag());
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable overlap_table(const OverlapSeries& o) {
    CsvTable t;
    t.header.push_back("t");
    for (Eigen::Index b = 0; b < o.manifold.cols(); ++b) t.header.push_back("O_" + std::to_string(b));
    for (std::size_t k = 0; k < o.times.size(); ++k) {
        std::vector<double> row{o.times[k]};
        for (Eigen::Index b = 0; b < o.manifold.cols(); ++b) row.push_back(o.manifold(static_cast<Eigen::Index>(k), b));
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable state_overlap_table(const OverlapSeries& o, const ManifoldSpectrum& spec) {
    CsvTable t;
    t.header = {"t", "manifold", "state", "energy", "decay_rate", "overlap"};
    for (std::size_t k = 0; k < o.snapshots.size(); ++k) {
        for (std::size_t b = 0; b < o.snapshots[k].per_state.size(); ++b) {
            const auto& mb = spec.manifolds.at(b);
            const auto& ov = o.snapshots[k].per_state[b];
            for (std::size_t i = 0; i < ov.size(); ++i)
                t.rows.push_back({o.snapshot_times[k], static_cast<double>(b), static_cast<double>(i),
                                  mb.energies[static_cast<Eigen::Index>(i)],
                                  mb.decay_rates[static_cast<Eigen::Index>(i)], ov[i]});
        }
    }
    return t;
}

CsvTable spectrum_table(const SpectrumResult& s) {
    CsvTable t;
    t.comments.push_back("t_prime=" + format_number(s.t_prime) + ",tau_max=" + format_number(s.tau_max) +
                         ",residual=" + format_number(s.residual));
    t.header = {"omega", "S_total"};
    for (std::size_t a = 0; a < s.per_atom.size(); ++a) t.header.push_back("S_" + std::to_string(a));
    for (std::size_t k = 0; k < s.omega.size(); ++k) {
        std::vector<double> row{s.omega[k], s.total[k]};
        for (const auto& pa : s.per_atom) row.push_back(pa[k]);
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace subrad::harness
