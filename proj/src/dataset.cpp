#include "rkl/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rkl/errors.hpp"

namespace rkl {

void SnapshotDataset::append(SnapshotRecord rec) {
    if (records.empty() && n_x == 0 && n_u == 0) {
        n_x = static_cast<int>(rec.x.size());
        n_u = static_cast<int>(rec.u.size());
    }
    if (rec.x.size() != n_x || rec.x_next.size() != n_x || rec.u.size() != n_u)
        throw ConfigError("dataset: record dimensions do not match the dataset");
    records.push_back(std::move(rec));
}

void SnapshotDataset::validate_chaining() const {
    for (std::size_t k = 1; k < records.size(); ++k) {
        if (records[k].traj != records[k - 1].traj) continue;
        if (records[k - 1].x_next != records[k].x)
            throw ConfigError("dataset: records " + std::to_string(k - 1) + " and " +
                              std::to_string(k) + " of trajectory " +
                              std::to_string(records[k].traj) + " do not chain");
    }
}

SnapshotDataset dataset_from_trajectory(const std::vector<double>& t,
                                        const std::vector<Eigen::VectorXd>& x,
                                        const std::vector<Eigen::VectorXd>& u, int traj) {
    if (t.size() < 2) throw ConfigError("trajectory needs at least two samples");
    if (x.size() != t.size() || u.size() != t.size())
        throw ConfigError("trajectory arrays must have equal length");

    std::vector<double> tt = t;
    std::vector<Eigen::VectorXd> xx = x, uu = u;

    // Detect irregular sampling and resample if needed.
    double dt_min = std::numeric_limits<double>::infinity(), dt_max = 0.0;
    for (std::size_t k = 1; k < tt.size(); ++k) {
        const double d = tt[k] - tt[k - 1];
        if (!(d > 0.0)) throw ConfigError("trajectory timestamps must be strictly increasing");
        dt_min = std::min(dt_min, d);
        dt_max = std::max(dt_max, d);
    }
    if (dt_max - dt_min > 1e-9 * dt_max) resample_uniform(tt, xx, uu, dt_min);

    SnapshotDataset ds;
    ds.dt = tt[1] - tt[0];
    for (std::size_t k = 0; k + 1 < tt.size(); ++k)
        ds.append({xx[k], uu[k], xx[k + 1], traj});
    return ds;
}

void resample_uniform(std::vector<double>& t, std::vector<Eigen::VectorXd>& x,
                      std::vector<Eigen::VectorXd>& u, double dt) {
    if (!(dt > 0.0)) throw ConfigError("resample: dt must be positive");
    const double t0 = t.front(), t1 = t.back();
    const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;

    std::vector<double> tr(n);
    std::vector<Eigen::VectorXd> xr(n), ur(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = t0 + static_cast<double>(k) * dt;
        while (j + 2 < t.size() && t[j + 1] <= tk) ++j;
        const double span = t[j + 1] - t[j];
        const double w = std::clamp((tk - t[j]) / span, 0.0, 1.0);
        tr[k] = tk;
        xr[k] = (1.0 - w) * x[j] + w * x[j + 1];
        ur[k] = (1.0 - w) * u[j] + w * u[j + 1];
    }
    t = std::move(tr);
    x = std::move(xr);
    u = std::move(ur);
}

namespace {

constexpr int kTrajectoryCsvVersion = 1;

} // namespace

void save_trajectory_csv(const std::string& path, const std::vector<double>& t,
                         const std::vector<Eigen::VectorXd>& x,
                         const std::vector<Eigen::VectorXd>& u,
                         const std::string& config_echo) {
    if (t.empty() || x.size() != t.size() || u.size() != t.size())
        throw ConfigError("save_trajectory_csv: inconsistent arrays");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const int n_x = static_cast<int>(x[0].size());
    const int n_u = static_cast<int>(u[0].size());

    out << "# format_version: " << kTrajectoryCsvVersion << "\n";
    if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
    out << "t";
    for (int i = 0; i < n_x; ++i) out << ",x" << i;
    for (int i = 0; i < n_u; ++i) out << ",u" << i;
    out << "\n";
    out.precision(17);
    for (std::size_t k = 0; k < t.size(); ++k) {
        out << t[k];
        for (int i = 0; i < n_x; ++i) out << "," << x[k][i];
        for (int i = 0; i < n_u; ++i) out << "," << u[k][i];
        out << "\n";
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

TrajectoryFile load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    TrajectoryFile file;
    std::string line;
    int n_x = -1, n_u = -1;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("# config: ");
            if (pos == 0) file.config_echo = line.substr(10);
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header_seen) {
            if (cells.empty() || cells[0] != "t")
                throw IoError(path + ": expected header starting with 't'");
            n_x = n_u = 0;
            for (std::size_t i = 1; i < cells.size(); ++i) {
                if (cells[i].rfind('x', 0) == 0) ++n_x;
                else if (cells[i].rfind('u', 0) == 0) ++n_u;
                else throw IoError(path + ": unexpected column '" + cells[i] + "'");
            }
            header_seen = true;
            continue;
        }
        if (static_cast<int>(cells.size()) != 1 + n_x + n_u)
            throw IoError(path + ": row with " + std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(1 + n_x + n_u));
        try {
            file.t.push_back(std::stod(cells[0]));
            Eigen::VectorXd xv(n_x), uv(n_u);
            for (int i = 0; i < n_x; ++i) xv[i] = std::stod(cells[1 + i]);
            for (int i = 0; i < n_u; ++i) uv[i] = std::stod(cells[1 + n_x + i]);
            file.x.push_back(std::move(xv));
            file.u.push_back(std::move(uv));
        } catch (const std::exception&) {
            throw IoError(path + ": malformed numeric cell in row '" + line + "'");
        }
    }
    if (!header_seen) throw IoError(path + ": no header row");
    if (file.t.empty()) throw IoError(path + ": no data rows");
    return file;
}

SnapshotDataset load_dataset_csv(const std::string& path) {
    const TrajectoryFile file = load_trajectory_csv(path);
    return dataset_from_trajectory(file.t, file.x, file.u);
}

} // namespace rkl
