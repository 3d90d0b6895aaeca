#include "rkl/edmd.hpp"

#include <Eigen/SVD>
#include <sstream>

#include "rkl/errors.hpp"

namespace rkl {

void assemble_snapshots(const SnapshotDataset& data, const Basis& state_basis,
                        const Basis* control_basis, Eigen::MatrixXd& Y, Eigen::MatrixXd& Ybar) {
    if (data.records.empty()) throw ConfigError("assemble_snapshots: empty dataset");
    if (state_basis.input_dim() != data.n_x)
        throw ConfigError("assemble_snapshots: state basis expects n_x=" +
                          std::to_string(state_basis.input_dim()) + ", dataset has " +
                          std::to_string(data.n_x));
    const int n_z = state_basis.output_dim();
    const int n_g = control_basis ? control_basis->output_dim() : 0;
    if (control_basis && control_basis->input_dim() != data.n_u)
        throw ConfigError("assemble_snapshots: control basis expects n_u=" +
                          std::to_string(control_basis->input_dim()) + ", dataset has " +
                          std::to_string(data.n_u));

    const auto m = static_cast<Eigen::Index>(data.records.size());
    Y.resize(n_z + n_g, m);
    Ybar.resize(n_z + n_g, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const SnapshotRecord& rec = data.records[static_cast<std::size_t>(k)];
        Y.col(k).head(n_z) = state_basis.lift(rec.x);
        Ybar.col(k).head(n_z) = state_basis.lift(rec.x_next);
        if (n_g > 0) {
            const Eigen::VectorXd g = control_basis->lift(rec.u);
            Y.col(k).tail(n_g) = g;
            Ybar.col(k).tail(n_g) = g;
        }
    }
}

KoopmanModel fit_from_moments(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q, int n_z,
                              double ridge) {
    const Eigen::Index d = G.rows();
    if (G.cols() != d || Q.cols() != d) throw ConfigError("fit_from_moments: moment shapes differ");
    if (n_z <= 0 || n_z > d) throw ConfigError("fit_from_moments: invalid n_z");
    if (ridge < 0.0) throw ConfigError("fit_from_moments: ridge must be non-negative");

    Eigen::MatrixXd Gr = G;
    if (ridge > 0.0) Gr.diagonal().array() += ridge;

    // SVD both inverts and diagnoses; the Gramian is symmetric PSD so the SVD
    // coincides with the eigendecomposition.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Gr, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();

    // With a positive ridge every eigenvalue is >= ridge and the inverse is
    // well defined; only the unridged fit fails loudly.
    if (ridge == 0.0) {
        const double sigma_max = sv.size() ? sv[0] : 0.0;
        const double tol = sigma_max * 1e-10;
        int rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv[i] > tol) ++rank;
        if (rank < d) {
            const double cond = (sv[d - 1] > 0.0) ? sigma_max / sv[d - 1]
                                                  : std::numeric_limits<double>::infinity();
            std::ostringstream msg;
            msg << "edmd fit: data Gramian is rank deficient (rank " << rank << " of " << d
                << ", condition number " << cond
                << "); add excitation, shrink the basis, or set a positive ridge";
            throw NumericalError(msg.str());
        }
    }

    Eigen::MatrixXd P = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    P = ((P + P.transpose()) * 0.5).eval();

    KoopmanModel model;
    model.n_z = n_z;
    model.n_g = static_cast<int>(d) - n_z;
    model.K = Q * P;
    model.P = std::move(P);
    return model;
}

KoopmanModel fit_edmd(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Ybar, int n_z,
                      double ridge) {
    if (Y.rows() != Ybar.rows() || Y.cols() != Ybar.cols())
        throw ConfigError("fit_edmd: Y and Ybar shapes differ");
    KoopmanModel model = fit_from_moments(Y * Y.transpose(), Ybar * Y.transpose(), n_z, ridge);
    model.sample_count = static_cast<std::uint64_t>(Y.cols());
    return model;
}

KoopmanModel fit_edmd(const SnapshotDataset& data, const BasisSpec& state_basis,
                      const BasisSpec& control_basis, double ridge) {
    const Basis phi = Basis::make(state_basis);
    const Basis psi = Basis::make(control_basis);
    Eigen::MatrixXd Y, Ybar;
    assemble_snapshots(data, phi, &psi, Y, Ybar);
    KoopmanModel model = fit_edmd(Y, Ybar, phi.output_dim(), ridge);
    model.state_basis = state_basis;
    model.control_basis = control_basis;
    model.has_control = true;
    model.dt = data.dt;
    return model;
}

KoopmanModel fit_edmd(const SnapshotDataset& data, const BasisSpec& state_basis, double ridge) {
    const Basis phi = Basis::make(state_basis);
    Eigen::MatrixXd Y, Ybar;
    assemble_snapshots(data, phi, nullptr, Y, Ybar);
    KoopmanModel model = fit_edmd(Y, Ybar, phi.output_dim(), ridge);
    model.state_basis = state_basis;
    model.has_control = false;
    model.dt = data.dt;
    return model;
}

WellposednessReport wellposedness_report(const Eigen::MatrixXd& Y) {
    WellposednessReport rep;
    rep.dim = static_cast<int>(Y.rows());
    const Eigen::MatrixXd G = Y * Y.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
    const Eigen::VectorXd& sv = svd.singularValues();
    rep.sigma_max = sv.size() ? sv[0] : 0.0;
    rep.sigma_min = sv.size() ? sv[sv.size() - 1] : 0.0;
    const double tol = rep.sigma_max * 1e-10;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rep.rank;
    rep.cond = (rep.sigma_min > 0.0) ? rep.sigma_max / rep.sigma_min
                                     : std::numeric_limits<double>::infinity();
    rep.full_rank = rep.rank == rep.dim;
    return rep;
}

std::string describe(const WellposednessReport& rep) {
    std::ostringstream os;
    os << "rank " << rep.rank << "/" << rep.dim << ", cond " << rep.cond
       << (rep.full_rank ? " (well posed)" : " (rank deficient)");
    return os.str();
}

} // namespace rkl
