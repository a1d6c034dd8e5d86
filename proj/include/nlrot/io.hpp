#pragma once

// Text file formats. All are comma-separated with a mandatory header row;
// metadata travels as "# key=value" lines before the header.
//
//   coincidence table   setting_a_id,setting_b_id,n_pp,n_pm,n_mp,n_mm
//   tomography counts   basis_a,basis_b,count        (16 rows)
//   joint observables   label,m_zz,sigma_zz,m_xz,sigma_xz,m_zx,sigma_zx
//   density matrix      re,im                        (16 rows, row-major HH,HV,VH,VV)

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nlrot/measure.hpp"
#include "nlrot/tomography.hpp"

namespace nlrot::io {

using Metadata = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char delim = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(trim(field));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

/// Full-precision decimal for values that must round-trip.
inline std::string exact(double v) { return detail::format_number(v, "%.17g"); }
/// Angles in output CSVs: degrees, six decimals.
inline std::string angle_deg(double radians) { return detail::format_number(to_deg(radians), "%.6f"); }

struct ParsedCsv {
    Metadata metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline ParsedCsv parse_csv(std::istream& in) {
    ParsedCsv out;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const std::string body = trim(t.substr(1));
            const auto eq = body.find('=');
            if (eq != std::string::npos) out.metadata[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
            continue;
        }
        if (!have_header) {
            out.header = split(t);
            have_header = true;
        } else {
            out.rows.push_back(split(t));
        }
    }
    if (!have_header) throw DataError("file has no header row");
    return out;
}

inline void expect_header(const ParsedCsv& csv, const std::vector<std::string>& want, const std::string& what) {
    if (csv.header != want) {
        std::string h;
        for (const auto& w : want) h += (h.empty() ? "" : ",") + w;
        throw DataError(what + ": expected header '" + h + "'");
    }
    for (std::size_t i = 0; i < csv.rows.size(); ++i)
        if (csv.rows[i].size() != want.size())
            throw DataError(what + ": row " + std::to_string(i + 1) + " has " +
                            std::to_string(csv.rows[i].size()) + " fields, expected " +
                            std::to_string(want.size()));
}

inline void write_metadata(std::ostream& out, const Metadata& md) {
    for (const auto& [k, v] : md) out << "# " << k << "=" << v << "\n";
}

template <class Fn>
void with_input(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    fn(in);
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& table_header() {
    static const std::vector<std::string> h{"setting_a_id", "setting_b_id", "n_pp", "n_pm", "n_mp", "n_mm"};
    return h;
}

inline void write_table(std::ostream& out, const CoincidenceTable& t) {
    write_metadata(out, t.metadata);
    const auto& h = table_header();
    out << h[0] << "," << h[1] << "," << h[2] << "," << h[3] << "," << h[4] << "," << h[5] << "\n";
    for (const auto& r : t.rows) {
        out << r.a.id() << "," << r.b.id();
        for (double c : r.counts) out << "," << exact(c);
        out << "\n";
    }
}

inline CoincidenceTable read_table(std::istream& in) {
    const auto csv = parse_csv(in);
    expect_header(csv, table_header(), "coincidence table");
    CoincidenceTable t;
    t.metadata = csv.metadata;
    for (const auto& row : csv.rows) {
        CoincidenceRow r{AnalyzerSetting::parse(row[0]), AnalyzerSetting::parse(row[1]), {}};
        for (int k = 0; k < 4; ++k) {
            r.counts[k] = detail::parse_number(row[2 + k]);
            if (!(r.counts[k] >= 0.0)) throw DataError("coincidence table: counts must be >= 0");
        }
        t.rows.push_back(r);
    }
    if (t.rows.empty()) throw DataError("coincidence table has no rows");
    return t;
}

// ---------------------------------------------------------------------------

struct TomographyData {
    std::vector<double> counts;  // canonical order of tomography_settings()
    Metadata metadata;
};

inline void write_tomography(std::ostream& out, const TomographyBasisSet& set, std::span<const double> counts,
                             const Metadata& md) {
    write_metadata(out, md);
    out << "basis_a,basis_b,count\n";
    for (std::size_t k = 0; k < set.size(); ++k)
        out << set[k].label_a << "," << set[k].label_b << "," << exact(counts[k]) << "\n";
}

/// Rows may come in any order; each of the 16 label pairs must appear once.
inline TomographyData read_tomography(std::istream& in, const TomographyBasisSet& set) {
    const auto csv = parse_csv(in);
    expect_header(csv, {"basis_a", "basis_b", "count"}, "tomography counts");
    TomographyData d;
    d.metadata = csv.metadata;
    d.counts.assign(set.size(), -1.0);
    for (const auto& row : csv.rows) {
        if (row[0].size() != 1 || row[1].size() != 1) throw DataError("tomography counts: bad basis label");
        const int k = set.index_of(row[0][0], row[1][0]);
        if (k < 0) throw DataError("tomography counts: unknown projector " + row[0] + row[1]);
        if (d.counts[k] >= 0.0) throw DataError("tomography counts: duplicate projector " + row[0] + row[1]);
        d.counts[k] = detail::parse_number(row[2]);
        if (!(d.counts[k] >= 0.0)) throw DataError("tomography counts: counts must be >= 0");
    }
    for (std::size_t k = 0; k < set.size(); ++k)
        if (d.counts[k] < 0.0) throw DataError("tomography counts: missing projector " + set[k].label());
    return d;
}

// ---------------------------------------------------------------------------

struct LabeledObservables {
    std::string label;
    JointObservables obs;
};

inline void write_observables(std::ostream& out, const std::vector<LabeledObservables>& rows,
                              const Metadata& md = {}) {
    write_metadata(out, md);
    out << "label,m_zz,sigma_zz,m_xz,sigma_xz,m_zx,sigma_zx\n";
    for (const auto& r : rows) {
        out << r.label << "," << exact(r.obs.m_zz) << "," << exact(r.obs.sigma_zz) << "," << exact(r.obs.m_xz)
            << "," << exact(r.obs.sigma_xz) << ",";
        if (r.obs.m_zx) out << exact(*r.obs.m_zx) << "," << exact(r.obs.sigma_zx);
        else out << ",";
        out << "\n";
    }
}

inline std::vector<LabeledObservables> read_observables(std::istream& in) {
    const auto csv = parse_csv(in);
    expect_header(csv, {"label", "m_zz", "sigma_zz", "m_xz", "sigma_xz", "m_zx", "sigma_zx"}, "observables");
    std::vector<LabeledObservables> out;
    for (const auto& row : csv.rows) {
        LabeledObservables r;
        r.label = row[0];
        r.obs.m_zz = detail::parse_number(row[1]);
        r.obs.sigma_zz = detail::parse_number(row[2]);
        r.obs.m_xz = detail::parse_number(row[3]);
        r.obs.sigma_xz = detail::parse_number(row[4]);
        if (!row[5].empty()) {
            r.obs.m_zx = detail::parse_number(row[5]);
            r.obs.sigma_zx = row[6].empty() ? 0.0 : detail::parse_number(row[6]);
        }
        out.push_back(r);
    }
    if (out.empty()) throw DataError("observables file has no rows");
    return out;
}

// ---------------------------------------------------------------------------

inline void write_density_matrix(std::ostream& out, const Mat4& m, const Metadata& md = {}) {
    write_metadata(out, md);
    out << "re,im\n";
    for (const auto& e : to_entries(m)) out << exact(e.real()) << "," << exact(e.imag()) << "\n";
}

inline Mat4 read_density_matrix(std::istream& in) {
    const auto csv = parse_csv(in);
    expect_header(csv, {"re", "im"}, "density matrix");
    if (csv.rows.size() != 16) throw DataError("density matrix: expected 16 entries");
    std::array<cplx, 16> e{};
    for (int k = 0; k < 16; ++k)
        e[k] = {detail::parse_number(csv.rows[k][0]), detail::parse_number(csv.rows[k][1])};
    return from_entries(e);
}

// ---------------------------------------------------------------------------

struct XyPoint {
    double x = 0.0;
    double y = 0.0;
    double sigma = 0.0;
};

struct XyColumns {
    int x = 0;
    int y = 1;
    int sigma = -1;  // -1: no uncertainty column
    char delimiter = ',';
};

/// Generic two- or three-column numeric reader for externally supplied data.
/// A first row that does not parse as numbers is taken as a header.
inline std::vector<XyPoint> read_xy(std::istream& in, const XyColumns& cols = {}) {
    std::vector<XyPoint> out;
    std::string line;
    bool first = true;
    const int need = std::max({cols.x, cols.y, cols.sigma}) + 1;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto f = split(t, cols.delimiter);
        const bool was_first = first;
        first = false;
        if (static_cast<int>(f.size()) < need) throw DataError("xy data: too few columns in '" + t + "'");
        try {
            XyPoint p;
            p.x = detail::parse_number(f[cols.x]);
            p.y = detail::parse_number(f[cols.y]);
            if (cols.sigma >= 0) p.sigma = detail::parse_number(f[cols.sigma]);
            out.push_back(p);
        } catch (const DataError&) {
            if (!was_first) throw;
        }
    }
    return out;
}

}  // namespace nlrot::io
