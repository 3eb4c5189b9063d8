#pragma once

#include "entsched/config.hpp"
#include "entsched/qmcs/bk_result.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace entsched {

/// Static per-pair system knowledge: entanglement fidelity F_ij and
/// per-attempt success probability R_ij. Symmetric, diagonal unused.
class PreInfo {
public:
    PreInfo() = default;
    explicit PreInfo(int n_qubits);

    int n_qubits() const { return n_; }

    double fidelity(int i, int j) const { return fidelity_[idx(i, j)]; }
    double success_prob(int i, int j) const { return success_[idx(i, j)]; }

    /// Sets both (i,j) and (j,i).
    void set_pair(int i, int j, double fidelity, double success_prob);

    bool operator==(const PreInfo& other) const = default;

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    int n_ = 0;
    std::vector<double> fidelity_;
    std::vector<double> success_;
};

/// Gaussian sampling with clipping; pairs visited in (i<j) row-major order
/// so the seed fully determines the matrices.
PreInfo generate_preinfo(const GenParams& params, int n_qubits);

/// CSV with header `i,j,fidelity,success_prob`, one row per unordered pair i<j.
PreInfo load_preinfo(const std::string& path);
void save_preinfo(const PreInfo& info, const std::string& path);

/// Pairs present in `results` take (F, R) from the chosen branch; the rest
/// are Gaussian-sampled from `fill`.
PreInfo preinfo_from_qmcs(const std::map<std::pair<int, int>, qmcs::BKResult>& results,
                          int n_qubits, const GenParams& fill);

} // namespace entsched
