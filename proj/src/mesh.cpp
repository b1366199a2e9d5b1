#include "fiml/mesh.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fiml {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void compute_wall_distance(Mesh& mesh) {
    mesh.wall_distance.assign(mesh.n_cells(), 0.0);
    for (int c = 0; c < mesh.n_cells(); ++c) {
        if (!mesh.is_active(c)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& wf : mesh.wall_faces) {
            const double dxw = mesh.cx[c] - wf[0];
            const double dyw = mesh.cy[c] - wf[1];
            best = std::min(best, std::hypot(dxw, dyw));
        }
        mesh.wall_distance[c] = best;
    }
}

void collect_wall_faces_2d(Mesh& mesh) {
    mesh.wall_faces.clear();
    for (int j = 0; j < mesh.ny; ++j) {
        for (int i = 0; i < mesh.nx; ++i) {
            const int c = mesh.index(i, j);
            if (!mesh.is_active(c)) continue;
            for (int side = 0; side < Mesh::kSides; ++side) {
                if (mesh.neighbor(c, side) >= 0) continue;
                if (mesh.boundary_tag(c, side) != BoundaryTag::Wall) continue;
                double fx = mesh.cx[c];
                double fy = mesh.cy[c];
                if (side == 0) fx -= 0.5 * mesh.dx;
                if (side == 1) fx += 0.5 * mesh.dx;
                if (side == 2) fy -= 0.5 * mesh.dy;
                if (side == 3) fy += 0.5 * mesh.dy;
                mesh.wall_faces.push_back({fx, fy});
            }
        }
    }
}

}  // namespace

std::string to_string(BoundaryTag tag) {
    switch (tag) {
        case BoundaryTag::Wall: return "wall";
        case BoundaryTag::Inlet: return "inlet";
        case BoundaryTag::Outlet: return "outlet";
        case BoundaryTag::Symmetry: return "symmetry";
        case BoundaryTag::Periodic: return "periodic";
    }
    return "unknown";
}

int Mesh::neighbor(int c, int side) const {
    int i = cell_i(c), j = cell_j(c);
    switch (side) {
        case 0: --i; break;
        case 1: ++i; break;
        case 2: --j; break;
        case 3: ++j; break;
    }
    if (!in_range(i, j)) return -1;
    const int nb = index(i, j);
    return blanked[nb] ? -1 : nb;
}

BoundaryTag Mesh::boundary_tag(int c, int side) const {
    int i = cell_i(c), j = cell_j(c);
    switch (side) {
        case 0: --i; break;
        case 1: ++i; break;
        case 2: --j; break;
        case 3: ++j; break;
    }
    if (in_range(i, j) && blanked[index(i, j)]) return BoundaryTag::Wall;
    switch (side) {
        case 0: return tag_xmin;
        case 1: return tag_xmax;
        case 2: return tag_ymin;
        default: return tag_ymax;
    }
}

double Mesh::face_area(int side) const {
    if (dim == 1) return 1.0;
    return (side < 2) ? dy : dx;
}

double Mesh::center_to_face(int c, int side) const {
    if (dim == 1) {
        const int j = cell_j(c);
        return (side == 2) ? cy[c] - yface[j] : yface[j + 1] - cy[c];
    }
    return (side < 2) ? 0.5 * dx : 0.5 * dy;
}

double Mesh::center_to_center(int c, int side) const {
    const int nb = neighbor(c, side);
    if (nb < 0) return center_to_face(c, side);
    return std::hypot(cx[nb] - cx[c], cy[nb] - cy[c]);
}

Mesh build_channel_1d(int n_cells, double stretch_ratio, double half_height) {
    require(n_cells >= 8, "build_channel_1d: n_cells must be >= 8");
    require(std::isfinite(stretch_ratio) && stretch_ratio >= 1.0,
            "build_channel_1d: stretch_ratio must be finite and >= 1");
    require(finite_positive(half_height), "build_channel_1d: half_height must be > 0");

    Mesh mesh;
    mesh.dim = 1;
    mesh.nx = 1;
    mesh.ny = n_cells;
    mesh.tag_ymin = BoundaryTag::Wall;
    mesh.tag_ymax = BoundaryTag::Symmetry;

    const double r = stretch_ratio;
    double h0;
    if (r == 1.0) {
        h0 = half_height / n_cells;
    } else {
        h0 = half_height * (r - 1.0) / (std::pow(r, n_cells) - 1.0);
    }

    mesh.hy.resize(n_cells);
    mesh.yface.resize(n_cells + 1);
    mesh.yface[0] = 0.0;
    double h = h0;
    for (int j = 0; j < n_cells; ++j) {
        mesh.hy[j] = h;
        mesh.yface[j + 1] = mesh.yface[j] + h;
        h *= r;
    }
    mesh.yface[n_cells] = half_height;  // absorb accumulated round-off

    mesh.cx.assign(n_cells, 0.0);
    mesh.cy.resize(n_cells);
    mesh.vol.resize(n_cells);
    mesh.blanked.assign(n_cells, 0);
    for (int j = 0; j < n_cells; ++j) {
        mesh.cy[j] = 0.5 * (mesh.yface[j] + mesh.yface[j + 1]);
        mesh.vol[j] = mesh.yface[j + 1] - mesh.yface[j];
    }

    mesh.wall_faces = {{0.0, 0.0}};
    compute_wall_distance(mesh);
    return mesh;
}

Mesh build_channel_2d(int nx, int ny, double domain_length, double domain_height) {
    require(nx >= 4 && ny >= 4, "build_channel_2d: nx, ny must be >= 4");
    require(finite_positive(domain_length) && finite_positive(domain_height),
            "build_channel_2d: domain size must be > 0");

    Mesh mesh;
    mesh.dim = 2;
    mesh.nx = nx;
    mesh.ny = ny;
    mesh.dx = domain_length / nx;
    mesh.dy = domain_height / ny;
    mesh.tag_xmin = BoundaryTag::Inlet;
    mesh.tag_xmax = BoundaryTag::Outlet;
    mesh.tag_ymin = BoundaryTag::Wall;
    mesh.tag_ymax = BoundaryTag::Wall;

    const int n = nx * ny;
    mesh.cx.resize(n);
    mesh.cy.resize(n);
    mesh.vol.assign(n, mesh.dx * mesh.dy);
    mesh.blanked.assign(n, 0);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int c = mesh.index(i, j);
            mesh.cx[c] = (i + 0.5) * mesh.dx;
            mesh.cy[c] = (j + 0.5) * mesh.dy;
        }
    }
    collect_wall_faces_2d(mesh);
    compute_wall_distance(mesh);
    return mesh;
}

Mesh build_step_2d(int nx, int ny, double step_height_fraction,
                   double domain_length, double domain_height) {
    require(nx >= 16 && ny >= 16, "build_step_2d: nx, ny must be >= 16");
    require(std::isfinite(step_height_fraction) && step_height_fraction > 0.0 &&
                step_height_fraction < 1.0,
            "build_step_2d: step_height_fraction must lie in (0, 1)");
    require(finite_positive(domain_length) && finite_positive(domain_height),
            "build_step_2d: domain size must be > 0");

    Mesh mesh = build_channel_2d(nx, ny, domain_length, domain_height);

    const double x_step = 0.25 * domain_length;
    const double y_step = step_height_fraction * domain_height;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        if (mesh.cx[c] < x_step && mesh.cy[c] < y_step) mesh.blanked[c] = 1;
    }
    collect_wall_faces_2d(mesh);
    compute_wall_distance(mesh);
    return mesh;
}

void gradient(const Mesh& mesh, const std::vector<double>& field,
              std::vector<double>& grad_x, std::vector<double>& grad_y) {
    const int n = mesh.n_cells();
    if (static_cast<int>(field.size()) != n)
        throw std::invalid_argument("gradient: field size does not match mesh");
    grad_x.assign(n, 0.0);
    grad_y.assign(n, 0.0);

    if (mesh.dim == 1) {
        for (int j = 0; j < mesh.ny; ++j) {
            const int lo = std::max(j - 1, 0);
            const int hi = std::min(j + 1, mesh.ny - 1);
            grad_y[j] = (field[hi] - field[lo]) / (mesh.cy[hi] - mesh.cy[lo]);
        }
        return;
    }

    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) continue;
        double gx = 0.0, gy = 0.0;
        for (int side = 0; side < Mesh::kSides; ++side) {
            const int nb = mesh.neighbor(c, side);
            const double face_val = (nb >= 0) ? 0.5 * (field[c] + field[nb]) : field[c];
            const double area = mesh.face_area(side);
            switch (side) {
                case 0: gx -= area * face_val; break;
                case 1: gx += area * face_val; break;
                case 2: gy -= area * face_val; break;
                case 3: gy += area * face_val; break;
            }
        }
        grad_x[c] = gx / mesh.vol[c];
        grad_y[c] = gy / mesh.vol[c];
    }
}

}  // namespace fiml
