#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fiml {

enum class BoundaryTag { Wall, Inlet, Outlet, Symmetry, Periodic };

std::string to_string(BoundaryTag tag);

/// Structured desk-scale mesh. 1D meshes are wall-normal columns (wall at
/// y = 0, symmetry plane at y = height); 2D meshes are uniform Cartesian
/// grids with optional blanked cells forming stair-step obstacles.
/// Values are immutable after construction.
struct Mesh {
    int dim = 1;
    int nx = 1;  // cells in x (1 for 1D)
    int ny = 1;  // cells in y

    std::vector<double> cx, cy;        // cell centers
    std::vector<double> vol;           // cell volumes (unit depth)
    std::vector<std::uint8_t> blanked; // 1 = solid cell, excluded from the flow
    std::vector<double> wall_distance; // cell center to nearest wall-face centroid

    // 1D spacing (per cell) and face coordinates; empty for 2D.
    std::vector<double> hy;
    std::vector<double> yface;  // ny + 1 entries

    // 2D uniform spacings; zero for 1D.
    double dx = 0.0;
    double dy = 0.0;

    // Domain-side boundary tags (2D); 1D uses ymin/ymax.
    BoundaryTag tag_xmin = BoundaryTag::Wall;
    BoundaryTag tag_xmax = BoundaryTag::Wall;
    BoundaryTag tag_ymin = BoundaryTag::Wall;
    BoundaryTag tag_ymax = BoundaryTag::Symmetry;

    std::vector<std::array<double, 2>> wall_faces;  // wall-face centroids

    int n_cells() const { return nx * ny; }
    int index(int i, int j) const { return j * nx + i; }
    int cell_i(int c) const { return c % nx; }
    int cell_j(int c) const { return c / nx; }
    bool is_active(int c) const { return blanked[c] == 0; }

    // Face sides: 0 = xmin, 1 = xmax, 2 = ymin, 3 = ymax.
    static constexpr int kSides = 4;
    bool in_range(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }

    /// Neighbor cell across `side`, or -1 when the face is a boundary
    /// (domain edge or blanked neighbor).
    int neighbor(int c, int side) const;

    /// Tag of a boundary face (call only when neighbor() < 0). Faces against
    /// blanked cells are walls.
    BoundaryTag boundary_tag(int c, int side) const;

    /// Face area for unit depth (2D: dy for x-faces, dx for y-faces; 1D: 1).
    double face_area(int side) const;

    /// Distance between the cell center and the face centroid on `side`.
    double center_to_face(int c, int side) const;

    /// Distance between the centers of c and its neighbor across `side`.
    double center_to_center(int c, int side) const;
};

/// 1D wall-normal channel mesh with geometric stretching from the wall.
/// Spacings form a geometric series with the given ratio summing to
/// half_height; stretch_ratio = 1 gives uniform spacing.
Mesh build_channel_1d(int n_cells, double stretch_ratio, double half_height);

/// 2D Cartesian channel with a blanked-cell backward-facing step occupying
/// x < domain_length/4, y < step_height_fraction * domain_height. Inlet on
/// the left, outlet on the right, walls top and bottom and on the step.
Mesh build_step_2d(int nx, int ny, double step_height_fraction,
                   double domain_length, double domain_height);

/// Plain 2D Cartesian channel (no obstacle): inlet left, outlet right,
/// walls top and bottom.
Mesh build_channel_2d(int nx, int ny, double domain_length, double domain_height);

/// Cell-centered gradient of a scalar field: central differences in 1D,
/// Green-Gauss in 2D, one-sided closure at boundaries. Blanked cells get
/// zero gradients.
void gradient(const Mesh& mesh, const std::vector<double>& field,
              std::vector<double>& grad_x, std::vector<double>& grad_y);

}  // namespace fiml
