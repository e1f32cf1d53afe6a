#include "persona/segmentation.hpp"

#include "persona/csv.hpp"
#include "persona/errors.hpp"
#include "persona/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

namespace persona::segmentation {

ShrunkCovariance ledoit_wolf(const Eigen::MatrixXd& data) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n < 2) throw DataError("ledoit_wolf: need at least 2 observations");
    if (!data.allFinite()) throw DataError("ledoit_wolf: non-finite values");

    Eigen::RowVectorXd mean = data.colwise().mean();
    Eigen::MatrixXd centered = data.rowwise() - mean;
    Eigen::MatrixXd S = (centered.transpose() * centered) / static_cast<double>(n);

    double mu = S.trace() / static_cast<double>(p);
    if (S.norm() < 1e-300) throw DegenerateDataError("ledoit_wolf: all-constant data");

    Eigen::MatrixXd target = mu * Eigen::MatrixXd::Identity(p, p);
    double d2 = (S - target).squaredNorm() / static_cast<double>(p);

    // b_bar^2 = (1/n^2) sum_k ||x_k x_k' - S||_F^2 / p, capped at d^2.
    double b2 = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXd x = centered.row(k);
        b2 += (x * x.transpose() - S).squaredNorm();
    }
    b2 /= static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(p);
    b2 = std::min(b2, d2);

    double delta = d2 > 0 ? b2 / d2 : 0.0;
    delta = std::clamp(delta, 0.0, 1.0);

    ShrunkCovariance out;
    out.shrinkage_delta = delta;
    out.target_mu = mu;
    out.matrix = (1.0 - delta) * S + delta * target;
    return out;
}

PcaModel pca_fit(const ShrunkCovariance& cov, const Eigen::VectorXd& mean, int d) {
    const auto p = cov.matrix.cols();
    if (d < 1 || d > p) throw DimensionError("pca_fit: d must be in [1, p]");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov.matrix);
    if (solver.info() != Eigen::Success) throw DataError("pca_fit: eigendecomposition failed");

    PcaModel model;
    model.mean = mean;
    model.components.resize(d, p);
    model.explained_variance.resize(d);
    // Eigen returns ascending eigenvalues; take the top d in descending order.
    for (int i = 0; i < d; ++i) {
        Eigen::Index src = p - 1 - i;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        // Sign convention: largest-magnitude entry positive (first on ties).
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        model.components.row(i) = v.transpose();
        model.explained_variance(i) = solver.eigenvalues()(src);
    }
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& data) {
    if (data.cols() != model.mean.size())
        throw DimensionError("pca_transform: data width " + std::to_string(data.cols()) +
                             " != model width " + std::to_string(model.mean.size()));
    return (data.rowwise() - model.mean.transpose()) * model.components.transpose();
}

double wasserstein_1d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("wasserstein_1d: sample size mismatch");
    double total = 0;
    for (size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return a.empty() ? 0.0 : total / static_cast<double>(a.size());
}

TemporalProfiles build_profiles(const std::vector<CustomerMonth>& months,
                                const std::vector<int>& feature_indices, int k_months) {
    // Standardization = log1p then z-score over all rows. The behavioral
    // features are lognormal-like; without the log the global scale is set by
    // the heavy upper tail and distances at the low end collapse.
    const size_t nf = feature_indices.size();
    auto transformed = [&](const CustomerMonth& m) {
        auto f = m.features();
        std::array<double, kNumTemporalFeatures> t{};
        for (size_t j = 0; j < nf; ++j)
            t[j] = std::log1p(std::max(0.0, f[feature_indices[j]]));
        return t;
    };
    std::vector<double> mean(nf, 0), var(nf, 0);
    for (const auto& m : months) {
        auto f = transformed(m);
        for (size_t j = 0; j < nf; ++j) mean[j] += f[j];
    }
    const double n_rows = static_cast<double>(months.size());
    for (auto& v : mean) v /= n_rows;
    for (const auto& m : months) {
        auto f = transformed(m);
        for (size_t j = 0; j < nf; ++j) {
            double d = f[j] - mean[j];
            var[j] += d * d;
        }
    }
    std::vector<double> sd(nf);
    for (size_t j = 0; j < nf; ++j) sd[j] = var[j] > 0 ? std::sqrt(var[j] / n_rows) : 1.0;

    std::map<int64_t, std::vector<const CustomerMonth*>> by_customer;
    for (const auto& m : months) by_customer[m.customer_id].push_back(&m);

    TemporalProfiles out;
    out.customer_ids.reserve(by_customer.size());
    out.sorted_values.reserve(by_customer.size());
    for (auto& [id, rows] : by_customer) {
        if (static_cast<int>(rows.size()) != k_months)
            throw DataError("customer " + std::to_string(id) + " has " +
                            std::to_string(rows.size()) + " months, expected " +
                            std::to_string(k_months));
        std::vector<std::vector<double>> per_feature(nf);
        for (size_t j = 0; j < nf; ++j) {
            auto& vals = per_feature[j];
            vals.reserve(rows.size());
            for (const CustomerMonth* r : rows)
                vals.push_back((transformed(*r)[j] - mean[j]) / sd[j]);
            std::sort(vals.begin(), vals.end());
        }
        out.customer_ids.push_back(id);
        out.sorted_values.push_back(std::move(per_feature));
    }
    return out;
}

double customer_distance(const TemporalProfiles& profiles, size_t i, size_t j) {
    const auto& a = profiles.sorted_values.at(i);
    const auto& b = profiles.sorted_values.at(j);
    double total = 0;
    for (size_t f = 0; f < a.size(); ++f) total += wasserstein_1d(a[f], b[f]);
    return a.empty() ? 0.0 : total / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Delaunay
// ---------------------------------------------------------------------------

namespace {

struct Triangle {
    int a, b, c;
    double cx, cy, r2;
    bool alive = true;
};

bool circumcircle(const Eigen::MatrixXd& pts, int ia, int ib, int ic, double& cx, double& cy,
                  double& r2) {
    double ax = pts(ia, 0), ay = pts(ia, 1);
    double bx = pts(ib, 0), by = pts(ib, 1);
    double cxp = pts(ic, 0), cyp = pts(ic, 1);
    double d = 2.0 * (ax * (by - cyp) + bx * (cyp - ay) + cxp * (ay - by));
    if (std::abs(d) < 1e-14) return false;
    double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cxp * cxp + cyp * cyp;
    cx = (a2 * (by - cyp) + b2 * (cyp - ay) + c2 * (ay - by)) / d;
    cy = (a2 * (cxp - bx) + b2 * (ax - cxp) + c2 * (bx - ax)) / d;
    double dx = ax - cx, dy = ay - cy;
    r2 = dx * dx + dy * dy;
    return true;
}

struct EdgeKey {
    int u, v;
    bool operator<(const EdgeKey& o) const { return std::tie(u, v) < std::tie(o.u, o.v); }
};
EdgeKey make_edge(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

DelaunayGraph triangulate_once(const Eigen::MatrixXd& pts, const std::vector<int>& active) {
    const int n_total = static_cast<int>(pts.rows());
    // Working copy with super-triangle vertices appended.
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (int i : active) {
        min_x = std::min(min_x, pts(i, 0));
        max_x = std::max(max_x, pts(i, 0));
        min_y = std::min(min_y, pts(i, 1));
        max_y = std::max(max_y, pts(i, 1));
    }
    double span = std::max({max_x - min_x, max_y - min_y, 1.0});
    double mid_x = (min_x + max_x) / 2, mid_y = (min_y + max_y) / 2;
    Eigen::MatrixXd work(n_total + 3, 2);
    work.topRows(n_total) = pts;
    work.row(n_total) << mid_x - 30 * span, mid_y - 10 * span;
    work.row(n_total + 1) << mid_x + 30 * span, mid_y - 10 * span;
    work.row(n_total + 2) << mid_x, mid_y + 30 * span;

    std::vector<Triangle> tris;
    {
        Triangle t{n_total, n_total + 1, n_total + 2, 0, 0, 0};
        circumcircle(work, t.a, t.b, t.c, t.cx, t.cy, t.r2);
        tris.push_back(t);
    }

    for (int ip : active) {
        double px = work(ip, 0), py = work(ip, 1);
        // Cavity: triangles whose circumcircle strictly contains the point.
        std::map<EdgeKey, int> edge_count;
        std::vector<size_t> bad;
        for (size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].alive) continue;
            double dx = px - tris[t].cx, dy = py - tris[t].cy;
            if (dx * dx + dy * dy < tris[t].r2 * (1.0 - 1e-12)) {
                bad.push_back(t);
                edge_count[make_edge(tris[t].a, tris[t].b)]++;
                edge_count[make_edge(tris[t].b, tris[t].c)]++;
                edge_count[make_edge(tris[t].c, tris[t].a)]++;
            }
        }
        for (size_t t : bad) tris[t].alive = false;
        for (const auto& [e, cnt] : edge_count) {
            if (cnt != 1) continue;  // interior cavity edge
            Triangle t{e.u, e.v, ip, 0, 0, 0};
            if (!circumcircle(work, t.a, t.b, t.c, t.cx, t.cy, t.r2)) continue;
            tris.push_back(t);
        }
    }

    DelaunayGraph g;
    g.points = pts;
    std::map<EdgeKey, char> edge_set;
    for (const auto& t : tris) {
        if (!t.alive) continue;
        if (t.a >= n_total || t.b >= n_total || t.c >= n_total) continue;
        std::array<int, 3> tri = {t.a, t.b, t.c};
        std::sort(tri.begin(), tri.end());
        g.triangles.push_back(tri);
        edge_set[make_edge(tri[0], tri[1])] = 1;
        edge_set[make_edge(tri[1], tri[2])] = 1;
        edge_set[make_edge(tri[0], tri[2])] = 1;
    }
    std::sort(g.triangles.begin(), g.triangles.end());
    for (const auto& [e, _] : edge_set) g.edges.emplace_back(e.u, e.v);
    return g;
}

// Cocircular quads are orientation ties; normalize the diagonal choice to the
// lexicographically smallest index pair so labels are deterministic.
void normalize_cocircular(DelaunayGraph& g) {
    bool changed = true;
    int guard = 0;
    while (changed && guard++ < 50) {
        changed = false;
        std::map<EdgeKey, std::vector<size_t>> by_edge;
        for (size_t t = 0; t < g.triangles.size(); ++t) {
            const auto& tr = g.triangles[t];
            by_edge[make_edge(tr[0], tr[1])].push_back(t);
            by_edge[make_edge(tr[1], tr[2])].push_back(t);
            by_edge[make_edge(tr[0], tr[2])].push_back(t);
        }
        for (const auto& [edge, ts] : by_edge) {
            if (ts.size() != 2) continue;
            const auto& t1 = g.triangles[ts[0]];
            const auto& t2 = g.triangles[ts[1]];
            int c1 = -1, c2 = -1;
            for (int v : t1)
                if (v != edge.u && v != edge.v) c1 = v;
            for (int v : t2)
                if (v != edge.u && v != edge.v) c2 = v;
            double cx, cy, r2;
            if (!circumcircle(g.points, t1[0], t1[1], t1[2], cx, cy, r2)) continue;
            double dx = g.points(c2, 0) - cx, dy = g.points(c2, 1) - cy;
            double d2 = dx * dx + dy * dy;
            if (std::abs(d2 - r2) > 1e-9 * std::max(r2, 1.0)) continue;  // not cocircular
            EdgeKey cur = make_edge(edge.u, edge.v);
            EdgeKey alt = make_edge(c1, c2);
            if (alt < cur) {
                std::array<int, 3> n1 = {alt.u, alt.v, edge.u};
                std::array<int, 3> n2 = {alt.u, alt.v, edge.v};
                std::sort(n1.begin(), n1.end());
                std::sort(n2.begin(), n2.end());
                g.triangles[ts[0]] = n1;
                g.triangles[ts[1]] = n2;
                changed = true;
                break;  // adjacency is stale; rebuild
            }
        }
        if (changed) {
            std::sort(g.triangles.begin(), g.triangles.end());
            std::map<EdgeKey, char> edge_set;
            for (const auto& tr : g.triangles) {
                edge_set[make_edge(tr[0], tr[1])] = 1;
                edge_set[make_edge(tr[1], tr[2])] = 1;
                edge_set[make_edge(tr[0], tr[2])] = 1;
            }
            g.edges.clear();
            for (const auto& [e, _] : edge_set) g.edges.emplace_back(e.u, e.v);
        }
    }
}

}  // namespace

DelaunayGraph delaunay_triangulate(const Eigen::MatrixXd& points) {
    if (points.rows() < 3) throw DataError("delaunay: need at least 3 points");
    if (points.cols() != 2) throw DimensionError("delaunay: points must be n x 2");

    // Merge duplicates (1e-12) onto their lowest-index representative.
    const int n = static_cast<int>(points.rows());
    std::vector<int> rep(n);
    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
        rep[i] = i;
        for (int j = 0; j < i; ++j) {
            if (rep[j] != j) continue;
            if (std::abs(points(i, 0) - points(j, 0)) <= 1e-12 &&
                std::abs(points(i, 1) - points(j, 1)) <= 1e-12) {
                rep[i] = j;
                break;
            }
        }
        if (rep[i] == i) active.push_back(i);
    }
    if (active.size() < 3) throw DataError("delaunay: fewer than 3 distinct points");

    DelaunayGraph g = triangulate_once(points, active);
    if (g.triangles.empty()) {
        // Likely collinear input: jitter with a fixed seed and retry once.
        Eigen::MatrixXd jittered = points;
        Rng rng(0x5eedULL);
        for (int i = 0; i < n; ++i) {
            jittered(i, 0) += (rng.uniform() - 0.5) * 2e-9;
            jittered(i, 1) += (rng.uniform() - 0.5) * 2e-9;
        }
        g = triangulate_once(jittered, active);
        g.points = points;
        if (g.triangles.empty())
            throw DegenerateDataError("delaunay: collinear input (after jitter retry)");
    }
    normalize_cocircular(g);

    // Duplicates attach to their representative with a graph edge.
    std::map<EdgeKey, char> extra;
    for (int i = 0; i < n; ++i)
        if (rep[i] != i) extra[make_edge(i, rep[i])] = 1;
    if (!extra.empty()) {
        for (const auto& [e, _] : extra) g.edges.emplace_back(e.u, e.v);
        std::sort(g.edges.begin(), g.edges.end());
    }
    return g;
}

SegmentAssignment wd_dbscan(const DelaunayGraph& graph,
                            const std::function<double(int, int)>& dist, double eps, int min_pts) {
    const int n = static_cast<int>(graph.points.rows());
    SegmentAssignment out;
    out.labels.assign(n, -1);
    if (n == 0) return out;
    if (eps <= 0 || min_pts < 1) throw ConfigError("wd_dbscan: eps must be > 0, min_pts >= 1");

    std::vector<std::vector<int>> adj(n);
    for (auto [u, v] : graph.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());

    auto neighborhood = [&](int p) {
        std::vector<int> nb{p};
        for (int q : adj[p])
            if (dist(p, q) <= eps) nb.push_back(q);
        std::sort(nb.begin(), nb.end());
        return nb;
    };

    std::vector<char> visited(n, 0);
    int next_label = 0;
    for (int p = 0; p < n; ++p) {
        if (visited[p]) continue;
        visited[p] = 1;
        auto nb = neighborhood(p);
        if (static_cast<int>(nb.size()) < min_pts) continue;  // noise unless claimed later
        int label = next_label++;
        out.labels[p] = label;
        std::deque<int> frontier(nb.begin(), nb.end());
        while (!frontier.empty()) {
            int q = frontier.front();
            frontier.pop_front();
            if (out.labels[q] == -1) out.labels[q] = label;  // claim noise as border
            if (visited[q]) continue;
            visited[q] = 1;
            out.labels[q] = label;
            auto qn = neighborhood(q);
            if (static_cast<int>(qn.size()) >= min_pts)
                for (int r : qn) frontier.push_back(r);
        }
    }
    out.n_clusters = next_label;
    return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DataError("ari: length mismatch");
    const double n = static_cast<double>(a.size());
    if (a.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> row_sums, col_sums;
    for (size_t i = 0; i < a.size(); ++i) {
        cells[{a[i], b[i]}] += 1;
        row_sums[a[i]] += 1;
        col_sums[b[i]] += 1;
    }
    auto comb2 = [](double x) { return x * (x - 1) / 2.0; };
    double sum_cells = 0, sum_rows = 0, sum_cols = 0;
    for (const auto& [k, v] : cells) sum_cells += comb2(v);
    for (const auto& [k, v] : row_sums) sum_rows += comb2(v);
    for (const auto& [k, v] : col_sums) sum_cols += comb2(v);
    double expected = sum_rows * sum_cols / comb2(n);
    double max_index = (sum_rows + sum_cols) / 2.0;
    if (std::abs(max_index - expected) < 1e-300) return 0.0;
    return (sum_cells - expected) / (max_index - expected);
}

SegmentQuality segment_quality(const SegmentAssignment& assignment, const std::vector<int>& truth) {
    if (assignment.labels.size() != truth.size())
        throw DataError("segment_quality: length mismatch");
    SegmentQuality q;
    q.n_clusters = assignment.n_clusters;
    std::vector<int> pred_nn, truth_nn;
    int noise = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (assignment.labels[i] == -1) {
            ++noise;
        } else {
            pred_nn.push_back(assignment.labels[i]);
            truth_nn.push_back(truth[i]);
        }
    }
    q.noise_fraction = truth.empty() ? 0.0 : static_cast<double>(noise) / truth.size();
    q.ari = pred_nn.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : adjusted_rand_index(pred_nn, truth_nn);
    return q;
}

// ---------------------------------------------------------------------------
// End-to-end stage
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd static_feature_matrix(const std::vector<CustomerStatic>& statics) {
    Eigen::MatrixXd X(statics.size(), 10);
    for (size_t i = 0; i < statics.size(); ++i) {
        const auto& s = statics[i];
        X(i, 0) = s.age;
        X(i, 1) = std::log(std::max(1.0, s.income));
        X(i, 2) = s.credit_score;
        X(i, 3) = s.risk_score;
        X(i, 4) = s.tenure_months;
        X(i, 5) = s.digital_engagement_index;
        X(i, 6) = s.holds_credit_card ? 1 : 0;
        X(i, 7) = s.holds_savings ? 1 : 0;
        X(i, 8) = s.holds_personal_loan ? 1 : 0;
        X(i, 9) = s.holds_mortgage ? 1 : 0;
    }
    // Column standardization so shrinkage treats features comparably.
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        double mean = X.col(c).mean();
        double sd = std::sqrt((X.col(c).array() - mean).square().mean());
        if (sd <= 0) sd = 1;
        X.col(c) = (X.col(c).array() - mean) / sd;
    }
    return X;
}

// kNN fallback graph when the projection dimension exceeds 2.
DelaunayGraph knn_graph(const Eigen::MatrixXd& points, int k) {
    const int n = static_cast<int>(points.rows());
    DelaunayGraph g;
    g.points = points;
    std::map<std::pair<int, int>, char> edge_set;
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> d;
        d.reserve(n - 1);
        for (int j = 0; j < n; ++j)
            if (j != i) d.emplace_back((points.row(i) - points.row(j)).squaredNorm(), j);
        int kk = std::min<int>(k, static_cast<int>(d.size()));
        std::partial_sort(d.begin(), d.begin() + kk, d.end());
        for (int t = 0; t < kk; ++t) {
            int j = d[t].second;
            edge_set[{std::min(i, j), std::max(i, j)}] = 1;
        }
    }
    for (const auto& [e, _] : edge_set) g.edges.push_back(e);
    return g;
}

}  // namespace

SegmentationResult run_segmentation(const std::vector<CustomerStatic>& statics,
                                    const std::vector<CustomerMonth>& months,
                                    const SegmentationConfig& config, int k_months) {
    if (statics.empty()) throw DataError("run_segmentation: empty static table");

    Eigen::MatrixXd X = static_feature_matrix(statics);
    auto cov = ledoit_wolf(X);
    auto pca = pca_fit(cov, X.colwise().mean(), config.d);
    Eigen::MatrixXd projected = pca_transform(pca, X);

    std::vector<int> features = config.feature_indices;
    if (features.empty())
        for (int f = 0; f < kNumTemporalFeatures; ++f) features.push_back(f);
    TemporalProfiles profiles = build_profiles(months, features, k_months);
    if (profiles.customer_ids.size() != statics.size())
        throw DataError("run_segmentation: temporal/static customer mismatch");
    // build_profiles orders by customer id; map static rows to profile rows.
    std::unordered_map<int64_t, size_t> profile_row;
    for (size_t i = 0; i < profiles.customer_ids.size(); ++i)
        profile_row[profiles.customer_ids[i]] = i;
    std::vector<size_t> prow(statics.size());
    for (size_t i = 0; i < statics.size(); ++i) prow[i] = profile_row.at(statics[i].customer_id);

    DelaunayGraph graph = config.d == 2 ? delaunay_triangulate(projected.leftCols(2))
                                        : knn_graph(projected, 10);
    auto dist = [&](int i, int j) { return customer_distance(profiles, prow[i], prow[j]); };

    double eps = config.eps_override;
    if (eps <= 0) {
        std::vector<double> edge_d;
        edge_d.reserve(graph.edges.size());
        for (auto [u, v] : graph.edges) edge_d.push_back(dist(u, v));
        std::sort(edge_d.begin(), edge_d.end());
        size_t idx = static_cast<size_t>(
            std::min<double>(edge_d.size() - 1.0,
                             std::ceil(config.eps_percentile / 100.0 * edge_d.size()) - 1));
        eps = edge_d.empty() ? 1.0 : edge_d[idx];
    }

    SegmentationResult result;
    result.assignment = wd_dbscan(graph, dist, eps, config.min_pts);
    result.eps = eps;
    result.min_pts = config.min_pts;
    result.shrinkage_delta = cov.shrinkage_delta;
    result.explained_variance = pca.explained_variance;
    for (const auto& s : statics) result.customer_ids.push_back(s.customer_id);

    // Model-facing ids: clusters ranked by size take ids 0..4; noise and
    // overflow clusters resolve to the nearest qualifying point via graph BFS.
    const auto& labels = result.assignment.labels;
    const int n = static_cast<int>(labels.size());
    std::vector<int> cluster_size(result.assignment.n_clusters, 0);
    for (int l : labels)
        if (l >= 0) cluster_size[l]++;
    std::vector<int> order(result.assignment.n_clusters);
    for (int i = 0; i < result.assignment.n_clusters; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return cluster_size[a] != cluster_size[b] ? cluster_size[a] > cluster_size[b] : a < b;
    });
    std::vector<int> remap(result.assignment.n_clusters, -1);
    for (size_t rank = 0; rank < order.size(); ++rank)
        remap[order[rank]] = static_cast<int>(rank);

    std::vector<std::vector<int>> adj(n);
    for (auto [u, v] : graph.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());

    result.model_segment_ids.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        int id = labels[i] >= 0 ? remap[labels[i]] : -1;
        if (id >= 0 && id < kNumSegments) {
            result.model_segment_ids[i] = id;
            continue;
        }
        // BFS to the nearest point in a top-5 cluster; lowest index wins ties.
        std::vector<char> seen(n, 0);
        std::deque<int> q{i};
        seen[i] = 1;
        int found = 0;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            int uid = labels[u] >= 0 ? remap[labels[u]] : -1;
            if (uid >= 0 && uid < kNumSegments) {
                found = uid;
                break;
            }
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    q.push_back(v);
                }
        }
        result.model_segment_ids[i] = found;
    }
    return result;
}

void write_segments_json(const std::filesystem::path& path, const SegmentationResult& result) {
    nlohmann::json j;
    j["customer_ids"] = result.customer_ids;
    j["labels"] = result.assignment.labels;
    j["n_clusters"] = result.assignment.n_clusters;
    j["model_segment_ids"] = result.model_segment_ids;
    j["eps"] = result.eps;
    j["min_pts"] = result.min_pts;
    j["shrinkage_delta"] = result.shrinkage_delta;
    std::vector<double> ev(result.explained_variance.data(),
                           result.explained_variance.data() + result.explained_variance.size());
    j["explained_variance"] = ev;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(0) << '\n';
}

SegmentationResult read_segments_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageDependencyError("missing file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    SegmentationResult r;
    r.customer_ids = j.at("customer_ids").get<std::vector<int64_t>>();
    r.assignment.labels = j.at("labels").get<std::vector<int>>();
    r.assignment.n_clusters = j.at("n_clusters").get<int>();
    r.model_segment_ids = j.at("model_segment_ids").get<std::vector<int>>();
    r.eps = j.at("eps").get<double>();
    r.min_pts = j.at("min_pts").get<int>();
    r.shrinkage_delta = j.at("shrinkage_delta").get<double>();
    auto ev = j.at("explained_variance").get<std::vector<double>>();
    r.explained_variance = Eigen::Map<Eigen::VectorXd>(ev.data(), ev.size());
    return r;
}

}  // namespace persona::segmentation
