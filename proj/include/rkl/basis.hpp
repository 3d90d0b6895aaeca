#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rkl {

enum class BasisKind { identity, polynomial, arm17, gaussian_rbf };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

// Declarative description of an observable basis. The same spec is stored in
// run configs and model checkpoints so a lifted model can never be paired
// with the wrong feature ordering.
struct BasisSpec {
    BasisKind kind = BasisKind::identity;
    int n_x = 0;
    int degree = 0;            // polynomial only
    double epsilon = 0.0;      // gaussian_rbf only
    Eigen::MatrixXd centers;   // gaussian_rbf only, one center per column (n_x rows)

    static BasisSpec identity(int n_x);
    static BasisSpec polynomial(int n_x, int degree);
    static BasisSpec arm17();
    static BasisSpec gaussian_rbf(Eigen::MatrixXd centers, double epsilon);

    bool operator==(const BasisSpec& other) const;
};

// An observable basis: lifts a raw state x into a feature vector z whose
// first n_x entries are x itself, so the raw state is always recoverable by
// truncation.
//
// Polynomial lift: after the raw state come monomials of total degree
// 2..degree. A monomial is included when its index multiset, written in
// non-decreasing index order, has non-increasing multiplicities (so x1^2*x2
// is a feature but x1*x2^2 is not). Features are ordered by degree, then
// lexicographically on the sorted index tuple. This family is 28-dimensional
// at n_x=4, degree=3 and reduces to the full quadratic set at degree=2.
class Basis {
public:
    static Basis make(const BasisSpec& spec);

    int input_dim() const { return spec_.n_x; }
    int output_dim() const { return n_z_; }
    const BasisSpec& spec() const { return spec_; }

    // Pure and deterministic; throws NumericalError on non-finite input,
    // ConfigError on a dimension mismatch.
    Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    // Output dimension as a pure function of (kind, n_x, parameters).
    static int lifted_dim(const BasisSpec& spec);

private:
    explicit Basis(BasisSpec spec);

    BasisSpec spec_;
    int n_z_ = 0;
    std::vector<std::vector<int>> monomials_; // index tuples, polynomial only
};

// The 17-dimensional planar-arm observable:
// [q1 q2 q1d q2d | 1 | q1^2 q1q2 q2^2 q1d^2 q1d*q2d q2d^2 |
//  sin q1, sin q2, sin(q1+q2), cos q1, cos q2, cos(q1+q2)].
Eigen::VectorXd lift_arm17(const Eigen::Ref<const Eigen::VectorXd>& x);

// Deterministic replacement for clustered RBF centers: an axis-aligned
// uniform grid over [lo, hi] with count[i] points per dimension, one center
// per column, last dimension varying fastest.
Eigen::MatrixXd rbf_grid_centers(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 const std::vector<int>& count);

} // namespace rkl
