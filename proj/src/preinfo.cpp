#include "entsched/preinfo.hpp"

#include "entsched/common.hpp"
#include "entsched/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace entsched {

PreInfo::PreInfo(int n_qubits)
    : n_(n_qubits),
      fidelity_(static_cast<std::size_t>(n_qubits) * n_qubits, 0.0),
      success_(static_cast<std::size_t>(n_qubits) * n_qubits, 0.0) {
    if (n_qubits < 2)
        throw ConfigError("PreInfo needs n_qubits >= 2");
}

void PreInfo::set_pair(int i, int j, double fidelity, double success_prob) {
    if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_)
        throw ConfigError("set_pair: bad pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
    if (!(fidelity > 0.0 && fidelity <= 1.0))
        throw ConfigError("fidelity out of (0,1] at (" + std::to_string(i) + "," +
                          std::to_string(j) + "): " + std::to_string(fidelity));
    if (!(success_prob > 0.0 && success_prob <= 1.0))
        throw ConfigError("success_prob out of (0,1] at (" + std::to_string(i) + "," +
                          std::to_string(j) + "): " + std::to_string(success_prob));
    fidelity_[idx(i, j)] = fidelity;
    fidelity_[idx(j, i)] = fidelity;
    success_[idx(i, j)] = success_prob;
    success_[idx(j, i)] = success_prob;
}

namespace {

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

} // namespace

PreInfo generate_preinfo(const GenParams& params, int n_qubits) {
    params.validate();
    if (n_qubits < 2)
        throw ConfigError("generate_preinfo: n_qubits must be >= 2");
    PreInfo info(n_qubits);
    Rng rng = Rng::derived(params.rng_seed, StreamTag::Preinfo, 0);
    for (int i = 0; i < n_qubits; ++i) {
        for (int j = i + 1; j < n_qubits; ++j) {
            double f = clip(rng.gaussian(params.mean_fidelity, params.sigma_fidelity),
                            params.min_fidelity, params.max_fidelity);
            double r = clip(rng.gaussian(params.mean_rate, params.sigma_rate),
                            params.min_rate, 1.0);
            info.set_pair(i, j, f, r);
        }
    }
    return info;
}

PreInfo load_preinfo(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open preinfo file: " + path);

    std::string header;
    if (!std::getline(in, header))
        throw IoError(path + ": empty file");
    if (header != "i,j,fidelity,success_prob")
        throw IoError(path + ": unexpected header '" + header + "'");

    struct Row {
        int i, j;
        double f, r;
    };
    std::vector<Row> rows;
    int max_index = -1;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        Row row;
        char extra;
        std::istringstream ls(line);
        char c1, c2, c3;
        if (!(ls >> row.i >> c1 >> row.j >> c2 >> row.f >> c3 >> row.r) || c1 != ',' ||
            c2 != ',' || c3 != ',' || (ls >> extra))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
        rows.push_back(row);
        max_index = std::max({max_index, row.i, row.j});
    }
    if (max_index < 1)
        throw IoError(path + ": no pairs");

    const int n = max_index + 1;
    PreInfo info(n);
    std::vector<char> seen(static_cast<std::size_t>(n) * n, 0);
    for (const auto& row : rows) {
        if (row.i < 0 || row.j < 0 || row.i == row.j)
            throw IoError(path + ": bad pair (" + std::to_string(row.i) + "," +
                          std::to_string(row.j) + ")");
        int a = std::min(row.i, row.j);
        int b = std::max(row.i, row.j);
        std::size_t key = static_cast<std::size_t>(a) * n + b;
        if (seen[key]) {
            // A duplicate row must agree with the stored value, else the
            // file encodes an asymmetric matrix.
            if (info.fidelity(a, b) != row.f || info.success_prob(a, b) != row.r)
                throw IoError(path + ": asymmetric entry at (" + std::to_string(a) + "," +
                              std::to_string(b) + ")");
            continue;
        }
        if (!(row.f > 0.0 && row.f <= 1.0))
            throw IoError(path + ": fidelity out of (0,1] at (" + std::to_string(a) + "," +
                          std::to_string(b) + "): " + std::to_string(row.f));
        if (!(row.r > 0.0 && row.r <= 1.0))
            throw IoError(path + ": success_prob out of (0,1] at (" + std::to_string(a) + "," +
                          std::to_string(b) + "): " + std::to_string(row.r));
        info.set_pair(a, b, row.f, row.r);
        seen[key] = 1;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!seen[static_cast<std::size_t>(i) * n + j])
                throw IoError(path + ": missing pair (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
    return info;
}

void save_preinfo(const PreInfo& info, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write preinfo file: " + path);
    out << "i,j,fidelity,success_prob\n";
    char buf[128];
    for (int i = 0; i < info.n_qubits(); ++i) {
        for (int j = i + 1; j < info.n_qubits(); ++j) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g", i, j, info.fidelity(i, j),
                          info.success_prob(i, j));
            out << buf << '\n';
        }
    }
}

PreInfo preinfo_from_qmcs(const std::map<std::pair<int, int>, qmcs::BKResult>& results,
                          int n_qubits, const GenParams& fill) {
    PreInfo info = generate_preinfo(fill, n_qubits);
    for (const auto& [pair, result] : results) {
        auto [i, j] = pair;
        if (i < 0 || j < 0 || i >= n_qubits || j >= n_qubits || i == j)
            throw ConfigError("preinfo_from_qmcs: pair (" + std::to_string(i) + "," +
                              std::to_string(j) + ") out of range for n_qubits=" +
                              std::to_string(n_qubits));
        info.set_pair(i, j, result.chosen_fidelity(), result.chosen_rate());
    }
    return info;
}

} // namespace entsched
