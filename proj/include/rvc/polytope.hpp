#pragma once

#include "rvc/mdp.hpp"
#include "rvc/policy_opt.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rvc {

inline constexpr double kVertexDedupTol = 1e-9;
inline constexpr double kHullTol = 1e-10;

/// Deterministic policy and recurrent class that generate a Psi vertex.
struct VertexGenerator {
    ActionChoice policy;
    StateSet recurrent_class;
};

/**
 * Invariant state-action distributions Psi (its vertices) and the state
 * marginal polytope Phi. psi_vertices[i](s, a) is a probability.
 */
struct OccupancyPolytope {
    std::vector<Matrix> psi_vertices;
    std::vector<VertexGenerator> generators;  ///< one per psi vertex
    std::vector<Vector> phi_vertices;         ///< deduplicated extreme points
    std::vector<std::size_t> phi_source;      ///< psi vertex each phi vertex marginalizes
};

/// max_{s'} | sum_{s,a} psi(s,a) P[a](s,s') - sum_a psi(s',a) |
double flow_residual(const Mdp& mdp, const Matrix& psi);

OccupancyPolytope compute_polytope(const Mdp& mdp, std::size_t cap = kDefaultEnumerationCap);

struct PhiMaximum {
    std::size_t index = 0;
    Vector vertex;
    double value = 0.0;
    /// All vertices within kGainTieTol of the maximum, including `index`.
    std::vector<std::size_t> ties;
};

PhiMaximum maximize_over_phi(const OccupancyPolytope& polytope, const Vector& objective);

/// Nonnegative least squares min ||A x - b||, x >= 0 (Lawson-Hanson active set).
Vector nnls(const Matrix& a, const Vector& b);

/// Distance from p to the convex hull of `points` (columns), via nnls with
/// an appended sum-to-one row.
double hull_distance(const std::vector<Vector>& points, const Vector& p);

// --- planar geometry for three-state MDPs ----------------------------------

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Equilateral-triangle embedding: e1 lower-left, e2 lower-right, e3 top.
Point2 embed(const Vector& distribution);
/// Image of a direction orthogonal to the all-ones vector.
Point2 embed_direction(const Vector& direction);

/// Removes the all-ones component.
Vector project_to_simplex_plane(const Vector& v);

struct Facet {
    std::size_t from;  ///< index into GeometryExport::phi_vertices
    std::size_t to;
    Point2 outward_normal;  ///< unit length
};

enum class Side { aligned, instrumental };

std::string to_string(Side side);

struct GeometryExport {
    std::vector<Point2> simplex_vertices;
    /// Phi vertices in counter-clockwise order, raw and embedded.
    std::vector<Vector> phi_vertices;
    std::vector<Point2> phi_points;
    std::vector<Facet> facets;
    double phi_area = 0.0;

    Vector reward_projected;
    Vector value_projected;
    std::optional<Vector> proxy_projected;
    Point2 reward_direction;
    Point2 value_direction;
    std::optional<Point2> proxy_direction;

    std::size_t aligned_vertex = 0;  ///< argmax of the true reward
    std::optional<std::size_t> instrumental_vertex;
    std::optional<Facet> top_facet;  ///< edge between aligned and instrumental vertices
    Point2 normal_direction;

    Side reward_side = Side::aligned;
    std::optional<Side> proxy_side;
    std::optional<std::size_t> proxy_argmax;  ///< from maximize_over_phi
    std::optional<std::size_t> proxy_cone_vertex;  ///< from the normal-cone test
    /// Whether proxy_side == instrumental exactly when the proxy argmax is the
    /// instrumental vertex. Empty when the argmax is not on the top facet, where
    /// the side test does not apply.
    std::optional<bool> side_test_agrees;
    std::vector<std::string> labels;
};

/// Vertex whose normal cone (in the embedded plane) contains direction u.
std::size_t normal_cone_vertex(const std::vector<Point2>& polygon, const std::vector<Facet>& facets,
                               Point2 u);

/// Side of the top facet's normal line that u points to.
Side side_of_normal(const GeometryExport& g, Point2 u);

/**
 * Planar export of Phi with the reward, value and optional proxy directions.
 * `instrumental_state` names the simplex corner whose vertex closes the top
 * facet. Throws InvalidInput unless the mdp has three states.
 */
GeometryExport export_geometry(const Mdp& mdp, const Vector& r, const Vector& v,
                               const std::optional<Vector>& r_hat = std::nullopt,
                               std::size_t instrumental_state = 1);

/// Angle of a direction from straight up, in radians (positive = leaning right).
double tilt_from_vertical(Point2 u);

} // namespace rvc
