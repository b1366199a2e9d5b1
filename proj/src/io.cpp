#include "fiml/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fiml/errors.hpp"

namespace fiml {

namespace {

std::ofstream open_out(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream iss(line);
    while (std::getline(iss, field, ',')) out.push_back(field);
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw IoError("csv: missing column '" + name + "'");
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    CsvTable table;
    std::string line;
    bool have_header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> fields = split_csv(line);
        if (!have_header) {
            table.header = fields;
            have_header = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const std::string& f : fields) {
            try {
                row.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw IoError("csv: bad number '" + f + "' at " + path + ":" +
                              std::to_string(lineno));
            }
        }
        if (row.size() != table.header.size())
            throw IoError("csv: ragged row at " + path + ":" + std::to_string(lineno));
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw IoError("csv: empty file " + path);
    return table;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_mesh_csv(const Mesh& mesh, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# units: x [m], y [m], volume [m^3 per unit depth], wall_distance [m]\n";
    out << "cell_id,x,y,volume,wall_distance,blanked\n";
    for (int c = 0; c < mesh.n_cells(); ++c) {
        out << c << ',' << format_double(mesh.cx[c]) << ',' << format_double(mesh.cy[c])
            << ',' << format_double(mesh.vol[c]) << ','
            << format_double(mesh.wall_distance[c]) << ',' << int(mesh.blanked[c])
            << '\n';
    }
}

void write_state_csv(const Mesh& mesh, const FlowState& state, const std::string& path) {
    std::ofstream out = open_out(path);
    const int n = mesh.n_cells();
    out << "# units: x,y [m]; u,v [m/s]; p [m^2/s^2]; k [m^2/s^2]; omega [1/s]; "
           "nu_t [m^2/s]\n";
    out << "cell_id,x,y,u,v,p,k,omega,nu_t\n";
    auto get = [&](const std::vector<double>& f, int c) {
        return c < static_cast<int>(f.size()) ? f[c] : 0.0;
    };
    for (int c = 0; c < n; ++c) {
        out << c << ',' << format_double(mesh.cx[c]) << ',' << format_double(mesh.cy[c])
            << ',' << format_double(get(state.u, c)) << ','
            << format_double(get(state.v, c)) << ',' << format_double(get(state.p, c))
            << ',' << format_double(get(state.k, c)) << ','
            << format_double(get(state.omega, c)) << ','
            << format_double(get(state.nu_t, c)) << '\n';
    }
}

FlowState read_state_csv(const Mesh& mesh, const std::string& path) {
    const CsvTable table = read_csv(path);
    const int n = mesh.n_cells();
    if (static_cast<int>(table.rows.size()) != n)
        throw IoError("state csv row count does not match mesh: " + path);
    FlowState s;
    const int cu = table.column("u"), cv = table.column("v"), cp = table.column("p");
    const int ck = table.column("k"), cw = table.column("omega"),
              cn = table.column("nu_t");
    s.u.resize(n);
    s.v.resize(n);
    s.p.resize(n);
    s.k.resize(n);
    s.omega.resize(n);
    s.nu_t.resize(n);
    for (int c = 0; c < n; ++c) {
        s.u[c] = table.rows[c][cu];
        s.v[c] = table.rows[c][cv];
        s.p[c] = table.rows[c][cp];
        s.k[c] = table.rows[c][ck];
        s.omega[c] = table.rows[c][cw];
        s.nu_t[c] = table.rows[c][cn];
    }
    return s;
}

void write_residual_history_csv(const ResidualHistory& history, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# normalized residual infinity norms per equation\n";
    out << "iteration";
    for (const std::string& eq : history.equations) out << ",res_" << eq;
    out << '\n';
    for (std::size_t i = 0; i < history.norms.size(); ++i) {
        out << (i + 1);
        for (double v : history.norms[i]) out << ',' << format_double(v);
        out << '\n';
    }
}

void write_beta_csv(const Mesh& mesh, const CorrectionField& beta,
                    const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# beta_c is the dimensionless omega-production correction factor\n";
    out << "cell_id,x,y,beta_c,active\n";
    const auto mask = beta.active_mask();
    for (int c = 0; c < mesh.n_cells(); ++c) {
        out << c << ',' << format_double(mesh.cx[c]) << ',' << format_double(mesh.cy[c])
            << ',' << format_double(beta.beta[c]) << ',' << int(mask[c]) << '\n';
    }
}

CorrectionField read_beta_csv(const Mesh& mesh, const std::string& path) {
    const CsvTable table = read_csv(path);
    if (static_cast<int>(table.rows.size()) != mesh.n_cells())
        throw IoError("beta csv row count does not match mesh: " + path);
    CorrectionField beta(mesh.n_cells());
    const int cb = table.column("beta_c");
    for (int c = 0; c < mesh.n_cells(); ++c) beta.beta[c] = table.rows[c][cb];
    return beta;
}

void write_objective_history_csv(const InversionResult& result, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# objective J [dimensionless] per accepted iterate; gradient norm is "
           "max |dJ/dbeta_c|\n";
    out << "iteration,J,grad_inf_norm\n";
    for (std::size_t i = 0; i < result.objective_history.size(); ++i) {
        const double g = (i < result.gradient_norm_history.size())
                             ? result.gradient_norm_history[i]
                             : std::numeric_limits<double>::quiet_NaN();
        out << i << ',' << format_double(result.objective_history[i]) << ','
            << format_double(g) << '\n';
    }
}

void write_features_csv(const std::vector<std::array<double, kNumFeatures>>& features,
                        const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# all features are dimensionless, bounded in [-1, 1]\n";
    out << "cell_id";
    for (const std::string& name : feature_names()) out << ',' << name;
    out << '\n';
    for (std::size_t c = 0; c < features.size(); ++c) {
        out << c;
        for (double v : features[c]) out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<std::array<double, kNumFeatures>> read_features_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (static_cast<int>(table.header.size()) != kNumFeatures + 1)
        throw IoError("features csv: expected cell_id + " +
                      std::to_string(kNumFeatures) + " columns in " + path);
    for (int i = 0; i < kNumFeatures; ++i)
        if (table.header[i + 1] != feature_names()[i])
            throw IoError("features csv: column '" + table.header[i + 1] +
                          "' does not match the feature index map");
    std::vector<std::array<double, kNumFeatures>> out(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (int i = 0; i < kNumFeatures; ++i) out[r][i] = table.rows[r][i + 1];
    return out;
}

void write_predictions_csv(const Mesh& mesh, const FieldPrediction& pred,
                           const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# mu_star and sigmas are in beta_c units (dimensionless)\n";
    out << "cell_id,x,y,mu_star,sigma_mu,sigma_sigma,sigma_star,beta_c,active\n";
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const EnsemblePrediction& p = pred.cells[c];
        out << c << ',' << format_double(mesh.cx[c]) << ',' << format_double(mesh.cy[c])
            << ',' << format_double(p.mu_star) << ',' << format_double(p.sigma_mu)
            << ',' << format_double(p.sigma_sigma) << ','
            << format_double(p.sigma_star) << ',' << format_double(p.beta_c) << ','
            << int(p.active) << '\n';
    }
}

void write_scalar_csv(const Mesh& mesh, const std::vector<double>& values,
                      const std::string& column, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "cell_id,x,y," << column << '\n';
    for (int c = 0; c < mesh.n_cells(); ++c) {
        out << c << ',' << format_double(mesh.cx[c]) << ',' << format_double(mesh.cy[c])
            << ',' << format_double(values[c]) << '\n';
    }
}

ReferenceSamples read_reference_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    ReferenceSamples s;
    const int cx = table.column("x"), cy = table.column("y");
    const int cu = table.column("u_ref"), cv = table.column("v_ref");
    for (const auto& row : table.rows) {
        s.x.push_back(row[cx]);
        s.y.push_back(row[cy]);
        s.u.push_back(row[cu]);
        s.v.push_back(row[cv]);
    }
    return s;
}

void write_reference_csv(const ReferenceSamples& samples, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "# units: x,y [m]; u_ref,v_ref [m/s]\n";
    out << "x,y,u_ref,v_ref\n";
    for (int i = 0; i < samples.n(); ++i) {
        out << format_double(samples.x[i]) << ',' << format_double(samples.y[i]) << ','
            << format_double(samples.u[i]) << ',' << format_double(samples.v[i])
            << '\n';
    }
}

AssimilationData map_reference_to_cells(const Mesh& mesh, const ReferenceSamples& samples,
                                        const BoxSelector& box,
                                        const std::string& source) {
    std::vector<int> cell_of(mesh.n_cells(), -1);  // sample index per cell
    for (int s = 0; s < samples.n(); ++s) {
        if (!box.contains(samples.x[s], samples.y[s])) continue;
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < mesh.n_cells(); ++c) {
            if (!mesh.is_active(c)) continue;
            const double d = std::hypot(mesh.cx[c] - samples.x[s],
                                        mesh.cy[c] - samples.y[s]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best >= 0) cell_of[best] = s;
    }
    AssimilationData data;
    data.source = source;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        if (cell_of[c] < 0) continue;
        data.cells.push_back(c);
        data.u_ref.push_back(samples.u[cell_of[c]]);
        data.v_ref.push_back(samples.v[cell_of[c]]);
    }
    if (data.cells.empty())
        throw IoError("map_reference_to_cells: no reference samples selected");
    return data;
}

void write_vtk(const Mesh& mesh, const std::map<std::string, std::vector<double>>& fields,
               const std::string& path, const std::string& title) {
    std::ofstream out = open_out(path);
    const int nx = mesh.nx, ny = mesh.ny;
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
    out << "DATASET STRUCTURED_GRID\n";
    out << "DIMENSIONS " << (nx + 1) << ' ' << (ny + 1) << " 1\n";
    out << "POINTS " << (nx + 1) * (ny + 1) << " double\n";
    for (int j = 0; j <= ny; ++j) {
        const double y = (mesh.dim == 1) ? mesh.yface[j] : j * mesh.dy;
        for (int i = 0; i <= nx; ++i) {
            const double x = (mesh.dim == 1) ? static_cast<double>(i) : i * mesh.dx;
            out << format_double(x) << ' ' << format_double(y) << " 0\n";
        }
    }
    out << "CELL_DATA " << mesh.n_cells() << '\n';
    for (const auto& [name, values] : fields) {
        if (static_cast<int>(values.size()) != mesh.n_cells())
            throw IoError("write_vtk: field '" + name + "' has wrong size");
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : values) out << format_double(v) << '\n';
    }
}

void write_training_set(const TrainingSet& training, const std::string& directory) {
    std::filesystem::create_directories(directory);
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["band"] = {training.band_low, training.band_high};
    manifest["dropped_sources"] = training.dropped_sources;
    manifest["sources"] = nlohmann::json::array();
    for (std::size_t s = 0; s < training.sources.size(); ++s) {
        const TrainingSource& src = training.sources[s];
        const std::string file = "source_" + std::to_string(s) + ".csv";
        nlohmann::json js;
        js["name"] = src.name;
        js["file"] = file;
        js["rows"] = src.targets.size();
        manifest["sources"].push_back(js);

        std::ofstream out = open_out(directory + "/" + file);
        out << "# training rows for source '" << src.name << "'\n";
        out << "row";
        for (const std::string& name : feature_names()) out << ',' << name;
        out << ",beta_c\n";
        for (std::size_t i = 0; i < src.targets.size(); ++i) {
            out << i;
            for (double v : src.features[i]) out << ',' << format_double(v);
            out << ',' << format_double(src.targets[i]) << '\n';
        }
    }
    std::ofstream mf = open_out(directory + "/training_manifest.json");
    mf << manifest.dump(2) << '\n';
}

TrainingSet read_training_set(const std::string& directory) {
    std::ifstream mf = open_in(directory + "/training_manifest.json");
    nlohmann::json manifest;
    mf >> manifest;
    TrainingSet training;
    training.band_low = manifest.at("band")[0].get<double>();
    training.band_high = manifest.at("band")[1].get<double>();
    training.dropped_sources =
        manifest.at("dropped_sources").get<std::vector<std::string>>();
    for (const auto& js : manifest.at("sources")) {
        const CsvTable table = read_csv(directory + "/" + js.at("file").get<std::string>());
        TrainingSource src;
        src.name = js.at("name").get<std::string>();
        const int cb = table.column("beta_c");
        for (const auto& row : table.rows) {
            std::array<double, kNumFeatures> f{};
            for (int i = 0; i < kNumFeatures; ++i) f[i] = row[i + 1];
            src.features.push_back(f);
            src.targets.push_back(row[cb]);
        }
        training.sources.push_back(std::move(src));
    }
    return training;
}

}  // namespace fiml
