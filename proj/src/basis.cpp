#include "rkl/basis.hpp"

#include <cmath>
#include <functional>

#include "rkl/errors.hpp"

namespace rkl {

std::string to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::identity: return "identity";
        case BasisKind::polynomial: return "polynomial";
        case BasisKind::arm17: return "arm17";
        case BasisKind::gaussian_rbf: return "gaussian_rbf";
    }
    return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
    if (name == "identity") return BasisKind::identity;
    if (name == "polynomial") return BasisKind::polynomial;
    if (name == "arm17") return BasisKind::arm17;
    if (name == "gaussian_rbf") return BasisKind::gaussian_rbf;
    throw ConfigError("unknown basis kind '" + name + "'");
}

BasisSpec BasisSpec::identity(int n_x) {
    BasisSpec s;
    s.kind = BasisKind::identity;
    s.n_x = n_x;
    return s;
}

BasisSpec BasisSpec::polynomial(int n_x, int degree) {
    BasisSpec s;
    s.kind = BasisKind::polynomial;
    s.n_x = n_x;
    s.degree = degree;
    return s;
}

BasisSpec BasisSpec::arm17() {
    BasisSpec s;
    s.kind = BasisKind::arm17;
    s.n_x = 4;
    return s;
}

BasisSpec BasisSpec::gaussian_rbf(Eigen::MatrixXd centers, double epsilon) {
    BasisSpec s;
    s.kind = BasisKind::gaussian_rbf;
    s.n_x = static_cast<int>(centers.rows());
    s.centers = std::move(centers);
    s.epsilon = epsilon;
    return s;
}

bool BasisSpec::operator==(const BasisSpec& other) const {
    if (kind != other.kind || n_x != other.n_x || degree != other.degree ||
        epsilon != other.epsilon)
        return false;
    if (centers.rows() != other.centers.rows() || centers.cols() != other.centers.cols())
        return false;
    return centers == other.centers;
}

namespace {

// Index tuples (i1 <= i2 <= ... <= ik) of length 2..degree whose
// multiplicities never increase along the index order, in (degree, lex)
// order. See the class comment in basis.hpp.
void enumerate_monomials(int n_x, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> tuple;
    auto multiplicities_ok = [](const std::vector<int>& t) {
        int run = 1, prev_run = 0;
        for (size_t i = 1; i <= t.size(); ++i) {
            if (i < t.size() && t[i] == t[i - 1]) {
                ++run;
            } else {
                if (prev_run != 0 && run > prev_run) return false;
                prev_run = run;
                run = 1;
            }
        }
        return true;
    };
    std::function<void(int, int)> recurse = [&](int start, int remaining) {
        if (remaining == 0) {
            if (multiplicities_ok(tuple)) out.push_back(tuple);
            return;
        }
        for (int i = start; i < n_x; ++i) {
            tuple.push_back(i);
            recurse(i, remaining - 1);
            tuple.pop_back();
        }
    };
    for (int d = 2; d <= degree; ++d) recurse(0, d);
}

} // namespace

Basis::Basis(BasisSpec spec) : spec_(std::move(spec)) {}

int Basis::lifted_dim(const BasisSpec& spec) {
    switch (spec.kind) {
        case BasisKind::identity:
            return spec.n_x;
        case BasisKind::polynomial: {
            std::vector<std::vector<int>> monomials;
            enumerate_monomials(spec.n_x, spec.degree, monomials);
            return spec.n_x + static_cast<int>(monomials.size());
        }
        case BasisKind::arm17:
            return 17;
        case BasisKind::gaussian_rbf:
            return spec.n_x + static_cast<int>(spec.centers.cols());
    }
    throw ConfigError("invalid basis kind");
}

Basis Basis::make(const BasisSpec& spec) {
    if (spec.n_x < 0) throw ConfigError("basis input dimension must be non-negative");
    switch (spec.kind) {
        case BasisKind::identity:
            break;
        case BasisKind::polynomial:
            if (spec.degree < 1) throw ConfigError("polynomial basis degree must be >= 1");
            break;
        case BasisKind::arm17:
            if (spec.n_x != 4) throw ConfigError("arm17 basis requires a 4-dimensional state");
            break;
        case BasisKind::gaussian_rbf:
            if (spec.centers.cols() == 0)
                throw ConfigError("gaussian_rbf basis requires at least one center");
            if (spec.centers.rows() != spec.n_x)
                throw ConfigError("gaussian_rbf centers must have n_x rows");
            if (!(spec.epsilon > 0.0))
                throw ConfigError("gaussian_rbf epsilon must be positive");
            break;
    }
    Basis b(spec);
    if (spec.kind == BasisKind::polynomial)
        enumerate_monomials(spec.n_x, spec.degree, b.monomials_);
    b.n_z_ = lifted_dim(spec);
    return b;
}

Eigen::VectorXd Basis::lift(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != spec_.n_x)
        throw ConfigError("lift: expected input of dimension " + std::to_string(spec_.n_x) +
                          ", got " + std::to_string(x.size()));
    if (!x.allFinite())
        throw NumericalError("lift: input contains non-finite entries");

    Eigen::VectorXd z(n_z_);
    z.head(spec_.n_x) = x;
    switch (spec_.kind) {
        case BasisKind::identity:
            break;
        case BasisKind::polynomial: {
            int row = spec_.n_x;
            for (const auto& tuple : monomials_) {
                double v = 1.0;
                for (int idx : tuple) v *= x[idx];
                z[row++] = v;
            }
            break;
        }
        case BasisKind::arm17:
            z = lift_arm17(x);
            break;
        case BasisKind::gaussian_rbf: {
            const auto& c = spec_.centers;
            for (int j = 0; j < c.cols(); ++j)
                z[spec_.n_x + j] = std::exp(-spec_.epsilon * (x - c.col(j)).squaredNorm());
            break;
        }
    }
    return z;
}

Eigen::VectorXd lift_arm17(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != 4) throw ConfigError("lift_arm17: expected a 4-dimensional state");
    if (!x.allFinite()) throw NumericalError("lift_arm17: input contains non-finite entries");
    const double q1 = x[0], q2 = x[1], q1d = x[2], q2d = x[3];
    Eigen::VectorXd z(17);
    z << q1, q2, q1d, q2d,
        1.0,
        q1 * q1, q1 * q2, q2 * q2, q1d * q1d, q1d * q2d, q2d * q2d,
        std::sin(q1), std::sin(q2), std::sin(q1 + q2),
        std::cos(q1), std::cos(q2), std::cos(q1 + q2);
    return z;
}

Eigen::MatrixXd rbf_grid_centers(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 const std::vector<int>& count) {
    const int n = static_cast<int>(lo.size());
    if (hi.size() != n || static_cast<int>(count.size()) != n)
        throw ConfigError("rbf_grid_centers: lo, hi, count must have equal dimension");
    long total = 1;
    for (int c : count) {
        if (c < 1) throw ConfigError("rbf_grid_centers: counts must be >= 1");
        total *= c;
    }
    Eigen::MatrixXd centers(n, total);
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        for (int d = n - 1; d >= 0; --d) {
            const int i = static_cast<int>(rem % count[d]);
            rem /= count[d];
            centers(d, idx) =
                count[d] == 1 ? 0.5 * (lo[d] + hi[d])
                              : lo[d] + (hi[d] - lo[d]) * static_cast<double>(i) / (count[d] - 1);
        }
    }
    return centers;
}

} // namespace rkl
