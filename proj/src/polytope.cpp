#include "rvc/polytope.hpp"

#include "rvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rvc {

namespace {

constexpr double kSqrt3Over2 = 0.86602540378443864676;

double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
Point2 minus(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }

Point2 unit(Point2 a) {
    const double len = std::hypot(a.x, a.y);
    return len > 0.0 ? Point2{a.x / len, a.y / len} : Point2{};
}

template <typename Range, typename Get>
bool contains_close(const Range& items, const Matrix& candidate, Get get) {
    return std::any_of(items.begin(), items.end(), [&](const auto& item) {
        return (get(item) - candidate).cwiseAbs().maxCoeff() <= kVertexDedupTol;
    });
}

} // namespace

double flow_residual(const Mdp& mdp, const Matrix& psi) {
    const auto n = Eigen::Index(mdp.n_states());
    Vector inflow = Vector::Zero(n);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a)
        inflow += mdp.transition(a).transpose() * psi.col(Eigen::Index(a));
    return (inflow - psi.rowwise().sum()).lpNorm<Eigen::Infinity>();
}

Vector nnls(const Matrix& a, const Vector& b) {
    const auto n = a.cols();
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(std::size_t(n), false);
    const double tol = 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());

    const auto solve_passive = [&](Vector& s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[std::size_t(j)])
                idx.push_back(j);
        Matrix sub(a.rows(), Eigen::Index(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            sub.col(Eigen::Index(k)) = a.col(idx[k]);
        const Vector local = sub.completeOrthogonalDecomposition().solve(b);
        s.setZero(n);
        for (std::size_t k = 0; k < idx.size(); ++k)
            s(idx[k]) = local(Eigen::Index(k));
    };

    for (Eigen::Index outer = 0; outer < 3 * n + 10; ++outer) {
        const Vector w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[std::size_t(j)] && w(j) > tol && (best < 0 || w(j) > w(best)))
                best = j;
        if (best < 0)
            break;
        passive[std::size_t(best)] = true;

        Vector s;
        for (Eigen::Index inner = 0; inner < 3 * n + 10; ++inner) {
            solve_passive(s);
            double alpha = 1.0;
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[std::size_t(j)] && s(j) <= 0.0) {
                    feasible = false;
                    const double denom = x(j) - s(j);
                    if (denom > 0.0)
                        alpha = std::min(alpha, x(j) / denom);
                }
            }
            if (feasible) {
                x = s;
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[std::size_t(j)] && x(j) <= 1e-15) {
                    passive[std::size_t(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
    }
    return x;
}

double hull_distance(const std::vector<Vector>& points, const Vector& p) {
    if (points.empty())
        return std::numeric_limits<double>::infinity();
    const auto dim = p.size();
    Matrix a(dim + 1, Eigen::Index(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        a.col(Eigen::Index(i)).head(dim) = points[i];
        a(dim, Eigen::Index(i)) = 1.0;
    }
    Vector b(dim + 1);
    b.head(dim) = p;
    b(dim) = 1.0;
    return (a * nnls(a, b) - b).norm();
}

OccupancyPolytope compute_polytope(const Mdp& mdp, std::size_t cap) {
    OccupancyPolytope out;
    const auto n = Eigen::Index(mdp.n_states());
    const auto na = Eigen::Index(mdp.n_actions());
    for_each_deterministic_policy(all_actions(mdp), cap, [&](const ActionChoice& actions) {
        const Matrix chain = deterministic_chain(mdp, actions);
        for (const auto& cls : recurrent_classes(chain)) {
            const Vector phi = class_invariant_distribution(chain, cls);
            Matrix psi = Matrix::Zero(n, na);
            for (auto s : cls)
                psi(Eigen::Index(s), Eigen::Index(actions[s])) = phi(Eigen::Index(s));
            if (contains_close(out.psi_vertices, psi, [](const Matrix& m) -> const Matrix& { return m; }))
                continue;
            out.psi_vertices.push_back(std::move(psi));
            out.generators.push_back({actions, cls});
        }
    });

    std::vector<Vector> marginals;
    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < out.psi_vertices.size(); ++i) {
        const Vector phi = out.psi_vertices[i].rowwise().sum();
        if (contains_close(marginals, phi, [](const Vector& v) -> const Vector& { return v; }))
            continue;
        marginals.push_back(phi);
        sources.push_back(i);
    }

    // Drop marginals that are convex combinations of the remaining ones.
    std::vector<bool> keep(marginals.size(), true);
    for (std::size_t i = 0; i < marginals.size(); ++i) {
        std::vector<Vector> others;
        for (std::size_t j = 0; j < marginals.size(); ++j)
            if (j != i && keep[j])
                others.push_back(marginals[j]);
        if (!others.empty() && hull_distance(others, marginals[i]) <= kHullTol)
            keep[i] = false;
    }
    for (std::size_t i = 0; i < marginals.size(); ++i) {
        if (keep[i]) {
            out.phi_vertices.push_back(marginals[i]);
            out.phi_source.push_back(sources[i]);
        }
    }
    return out;
}

PhiMaximum maximize_over_phi(const OccupancyPolytope& polytope, const Vector& objective) {
    if (polytope.phi_vertices.empty())
        throw InvalidInput("polytope has no vertices");
    PhiMaximum out;
    std::vector<double> values;
    for (const auto& phi : polytope.phi_vertices) {
        if (phi.size() != objective.size())
            throw InvalidInput("objective length does not match the polytope");
        values.push_back(objective.dot(phi));
    }
    out.index = std::size_t(std::max_element(values.begin(), values.end()) - values.begin());
    out.value = values[out.index];
    out.vertex = polytope.phi_vertices[out.index];
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] >= out.value - kGainTieTol)
            out.ties.push_back(i);
    return out;
}

Point2 embed(const Vector& distribution) {
    if (distribution.size() != 3)
        throw InvalidInput("planar embedding needs three states");
    return {distribution(1) + 0.5 * distribution(2), kSqrt3Over2 * distribution(2)};
}

Point2 embed_direction(const Vector& direction) { return embed(direction); }

Vector project_to_simplex_plane(const Vector& v) { return v.array() - v.mean(); }

std::string to_string(Side side) { return side == Side::aligned ? "aligned" : "instrumental"; }

std::size_t normal_cone_vertex(const std::vector<Point2>& polygon, const std::vector<Facet>& facets,
                               Point2 u) {
    if (polygon.size() <= 1 || facets.empty())
        return 0;
    // facets[i] leaves polygon[i]; the cone of vertex i lies between the
    // outward normals of the incoming and outgoing facets.
    const auto m = polygon.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Point2 in = facets[(i + m - 1) % m].outward_normal;
        const Point2 out = facets[i].outward_normal;
        if (cross(in, u) >= 0.0 && cross(u, out) >= 0.0)
            return i;
    }
    // Numerically on a boundary: fall back to the best-aligned normal pair.
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        const double score = std::min(cross(facets[(i + m - 1) % m].outward_normal, u),
                                      cross(u, facets[i].outward_normal));
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

Side side_of_normal(const GeometryExport& g, Point2 u) {
    if (!g.instrumental_vertex)
        return Side::aligned;
    const Point2 edge = minus(g.phi_points[*g.instrumental_vertex], g.phi_points[g.aligned_vertex]);
    return dot(u, edge) > 0.0 ? Side::instrumental : Side::aligned;
}

double tilt_from_vertical(Point2 u) { return std::atan2(u.x, u.y); }

GeometryExport export_geometry(const Mdp& mdp, const Vector& r, const Vector& v,
                               const std::optional<Vector>& r_hat, std::size_t instrumental_state) {
    if (mdp.n_states() != 3)
        throw InvalidInput("planar geometry export needs a three-state mdp");
    if (r.size() != 3 || v.size() != 3 || (r_hat && r_hat->size() != 3))
        throw InvalidInput("reward, value and proxy must have three entries");
    if (instrumental_state >= 3)
        throw InvalidInput("instrumental state out of range");

    GeometryExport g;
    g.simplex_vertices = {{0.0, 0.0}, {1.0, 0.0}, {0.5, kSqrt3Over2}};
    g.labels = {"common", "instrumental", "terminal"};

    OccupancyPolytope poly = compute_polytope(mdp);
    const auto m = poly.phi_vertices.size();

    // Counter-clockwise order around the centroid.
    Point2 centroid;
    for (const auto& phi : poly.phi_vertices) {
        const auto p = embed(phi);
        centroid.x += p.x / double(m);
        centroid.y += p.y / double(m);
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const auto a = minus(embed(poly.phi_vertices[i]), centroid);
        const auto b = minus(embed(poly.phi_vertices[j]), centroid);
        return std::atan2(a.y, a.x) < std::atan2(b.y, b.x);
    });
    OccupancyPolytope ordered = poly;
    ordered.phi_vertices.clear();
    ordered.phi_source.clear();
    for (auto i : order) {
        ordered.phi_vertices.push_back(poly.phi_vertices[i]);
        ordered.phi_source.push_back(poly.phi_source[i]);
    }
    g.phi_vertices = ordered.phi_vertices;
    for (const auto& phi : g.phi_vertices)
        g.phi_points.push_back(embed(phi));

    if (m >= 2) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = (i + 1) % m;
            const Point2 edge = minus(g.phi_points[j], g.phi_points[i]);
            g.facets.push_back({i, j, unit({edge.y, -edge.x})});
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto& a = g.phi_points[i];
        const auto& b = g.phi_points[(i + 1) % m];
        g.phi_area += 0.5 * cross(a, b);
    }

    g.reward_projected = project_to_simplex_plane(r);
    g.value_projected = project_to_simplex_plane(v);
    g.reward_direction = embed_direction(g.reward_projected);
    g.value_direction = embed_direction(g.value_projected);

    g.aligned_vertex = maximize_over_phi(ordered, r).index;
    Vector corner = Vector::Zero(3);
    corner(Eigen::Index(instrumental_state)) = 1.0;
    for (std::size_t i = 0; i < m; ++i)
        if ((g.phi_vertices[i] - corner).cwiseAbs().maxCoeff() <= kVertexDedupTol)
            g.instrumental_vertex = i;
    if (g.instrumental_vertex && *g.instrumental_vertex != g.aligned_vertex) {
        for (const auto& f : g.facets) {
            if ((f.from == g.aligned_vertex && f.to == *g.instrumental_vertex) ||
                (f.to == g.aligned_vertex && f.from == *g.instrumental_vertex)) {
                g.top_facet = f;
                g.normal_direction = f.outward_normal;
            }
        }
    }
    if (!g.top_facet)
        g.instrumental_vertex.reset();
    g.reward_side = side_of_normal(g, g.reward_direction);

    if (r_hat) {
        g.proxy_projected = project_to_simplex_plane(*r_hat);
        g.proxy_direction = embed_direction(*g.proxy_projected);
        g.proxy_argmax = maximize_over_phi(ordered, *r_hat).index;
        g.proxy_cone_vertex = normal_cone_vertex(g.phi_points, g.facets, *g.proxy_direction);
        if (g.top_facet) {
            g.proxy_side = side_of_normal(g, *g.proxy_direction);
            const bool on_facet = *g.proxy_argmax == g.aligned_vertex || *g.proxy_argmax == *g.instrumental_vertex;
            if (on_facet)
                g.side_test_agrees =
                    (*g.proxy_side == Side::instrumental) == (*g.proxy_argmax == *g.instrumental_vertex);
        }
    }
    return g;
}

} // namespace rvc
