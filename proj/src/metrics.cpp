#include "rkl/metrics.hpp"

#include <cmath>

#include "rkl/errors.hpp"

namespace rkl {

double rmse(const TipTrajectory& actual, const TipTrajectory& reference) {
    if (actual.size() != reference.size())
        throw ConfigError("rmse: trajectories have different lengths");
    if (actual.empty()) throw ConfigError("rmse: empty trajectories");
    double acc = 0.0;
    for (std::size_t k = 0; k < actual.size(); ++k)
        acc += (actual[k] - reference[k]).squaredNorm();
    return std::sqrt(acc / static_cast<double>(actual.size()));
}

namespace {

bool is_constant(const TipTrajectory& s) {
    for (std::size_t k = 1; k < s.size(); ++k)
        if ((s[k] - s[0]).cwiseAbs().maxCoeff() > 1e-15) return false;
    return true;
}

// Mean over coordinates of the Pearson correlation between actual[t] and
// reference[t - tau] on the overlapping index range.
double shifted_correlation(const TipTrajectory& actual, const TipTrajectory& reference, int tau) {
    const int L = static_cast<int>(actual.size());
    const int lo = std::max(0, tau);
    const int hi = std::min(L, L + tau); // actual index range [lo, hi)
    const int n = hi - lo;
    if (n < 2) return -std::numeric_limits<double>::infinity();

    double corr_sum = 0.0;
    for (int c = 0; c < 2; ++c) {
        double ma = 0.0, mr = 0.0;
        for (int t = lo; t < hi; ++t) {
            ma += actual[t][c];
            mr += reference[t - tau][c];
        }
        ma /= n;
        mr /= n;
        double saa = 0.0, srr = 0.0, sar = 0.0;
        for (int t = lo; t < hi; ++t) {
            const double da = actual[t][c] - ma;
            const double dr = reference[t - tau][c] - mr;
            saa += da * da;
            srr += dr * dr;
            sar += da * dr;
        }
        const double denom = std::sqrt(saa * srr);
        corr_sum += (denom > 1e-30) ? sar / denom : 0.0;
    }
    return 0.5 * corr_sum;
}

} // namespace

double time_lag(const TipTrajectory& actual, const TipTrajectory& reference, double dt) {
    if (actual.size() != reference.size())
        throw ConfigError("time_lag: trajectories have different lengths");
    const int L = static_cast<int>(actual.size());
    if (L < 16) throw ConfigError("time_lag: need at least 16 samples");
    if (!(dt > 0)) throw ConfigError("time_lag: dt must be positive");
    if (is_constant(actual) || is_constant(reference))
        throw ConfigError("time_lag: constant series has no defined lag");

    const int max_shift = L / 4;
    int best_tau = 0;
    double best = shifted_correlation(actual, reference, 0);
    for (int mag = 1; mag <= max_shift; ++mag) {
        for (const int tau : {mag, -mag}) {
            const double c = shifted_correlation(actual, reference, tau);
            if (c > best) {
                best = c;
                best_tau = tau;
            }
        }
    }
    return best_tau * dt;
}

double frechet_distance(const TipTrajectory& a, const TipTrajectory& b) {
    if (a.empty() || b.empty()) throw ConfigError("frechet_distance: empty trajectory");
    const std::size_t n = a.size(), m = b.size();
    // Rolling rows of the coupling-minimax recursion.
    std::vector<double> prev(m), cur(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double d = (a[0] - b[j]).norm();
        prev[j] = (j == 0) ? d : std::max(prev[j - 1], d);
    }
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = (a[i] - b[j]).norm();
            double reach = prev[j]; // advance in a only
            if (j > 0) reach = std::min(reach, std::min(prev[j - 1], cur[j - 1]));
            cur[j] = std::max(reach, d);
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

} // namespace rkl
