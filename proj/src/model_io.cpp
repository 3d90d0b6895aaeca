#include "rkl/model_io.hpp"

#include <Eigen/Eigenvalues>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rkl/errors.hpp"

namespace rkl {
namespace {

constexpr char kMagic[4] = {'R', 'K', 'L', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw IoError("model checkpoint truncated");
}

template <typename T> void put(std::ostream& out, T v) { put_bytes(out, &v, sizeof v); }

template <typename T> T get(std::istream& in) {
    T v;
    get_bytes(in, &v, sizeof v);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    put_bytes(out, s.data(), s.size());
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (1u << 30)) throw IoError("model checkpoint: implausible string length");
    std::string s(n, '\0');
    if (n) get_bytes(in, s.data(), n);
    return s;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    put<std::int64_t>(out, m.rows());
    put<std::int64_t>(out, m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
}

Eigen::MatrixXd get_matrix(std::istream& in) {
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    if (rows < 0 || cols < 0 || rows > (1 << 20) || cols > (1 << 20))
        throw IoError("model checkpoint: implausible matrix shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>(in);
    return m;
}

void put_basis(std::ostream& out, const BasisSpec& spec) {
    put<std::int32_t>(out, static_cast<std::int32_t>(spec.kind));
    put<std::int32_t>(out, spec.n_x);
    put<std::int32_t>(out, spec.degree);
    put<double>(out, spec.epsilon);
    put_matrix(out, spec.centers);
}

BasisSpec get_basis(std::istream& in) {
    BasisSpec spec;
    spec.kind = static_cast<BasisKind>(get<std::int32_t>(in));
    spec.n_x = get<std::int32_t>(in);
    spec.degree = get<std::int32_t>(in);
    spec.epsilon = get<double>(in);
    spec.centers = get_matrix(in);
    return spec;
}

} // namespace

void save_model(const std::string& path, const KoopmanModel& model,
                const std::string& config_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    put_bytes(out, kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kFormatVersion);
    put<std::int32_t>(out, model.n_z);
    put<std::int32_t>(out, model.n_g);
    put<std::uint8_t>(out, model.has_control ? 1 : 0);
    put<std::uint64_t>(out, model.sample_count);
    put<double>(out, model.dt);
    put_basis(out, model.state_basis);
    put_basis(out, model.control_basis);
    put_string(out, config_echo);
    put_matrix(out, model.K);
    put_matrix(out, model.P);
    if (!out) throw IoError("write to '" + path + "' failed");
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");

    char magic[4];
    get_bytes(in, magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw IoError("'" + path + "' is not a model checkpoint");
    const auto version = get<std::uint32_t>(in);
    if (version != kFormatVersion)
        throw IoError("'" + path + "': unsupported checkpoint version " + std::to_string(version));

    LoadedModel loaded;
    KoopmanModel& model = loaded.model;
    model.n_z = get<std::int32_t>(in);
    model.n_g = get<std::int32_t>(in);
    model.has_control = get<std::uint8_t>(in) != 0;
    model.sample_count = get<std::uint64_t>(in);
    model.dt = get<double>(in);
    model.state_basis = get_basis(in);
    model.control_basis = get_basis(in);
    loaded.config_echo = get_string(in);
    model.K = get_matrix(in);
    model.P = get_matrix(in);

    const Eigen::Index d = model.n_z + model.n_g;
    if (model.K.rows() != d || model.K.cols() != d || model.P.rows() != d || model.P.cols() != d)
        throw IoError("'" + path + "': checkpoint dimensions are inconsistent");
    return loaded;
}

std::string model_info(const KoopmanModel& model) {
    std::ostringstream os;
    os << "lifted state dim n_z: " << model.n_z << "\n"
       << "lifted control dim n_g: " << model.n_g << "\n"
       << "state basis: " << to_string(model.state_basis.kind) << " (n_x=" << model.state_basis.n_x
       << " -> " << model.n_z << ")\n";
    if (model.has_control)
        os << "control basis: " << to_string(model.control_basis.kind)
           << " (n_u=" << model.control_basis.n_x << " -> " << model.n_g << ")\n";
    else
        os << "control basis: none (autonomous)\n";
    os << "dt: " << model.dt << "\n"
       << "samples: " << model.sample_count << "\n";
    if (model.n_z > 0 && model.K.size() > 0) {
        const Eigen::VectorXcd eig = model.K_z().eval().eigenvalues();
        os << "spectral radius of K_z: " << eig.cwiseAbs().maxCoeff() << "\n";
    }
    return os.str();
}

} // namespace rkl
