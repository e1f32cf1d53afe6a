#pragma once

#include "persona/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

namespace persona::segmentation {

// ---------------------------------------------------------------------------
// Shrinkage covariance + PCA
// ---------------------------------------------------------------------------

struct ShrunkCovariance {
    Eigen::MatrixXd matrix;    // (1-delta)*S + delta*mu*I
    double shrinkage_delta = 0;
    double target_mu = 0;      // trace(S)/p
};

// Ledoit-Wolf shrinkage toward mu*I with analytically optimal intensity,
// clamped to [0,1]. Rows of `data` are observations.
ShrunkCovariance ledoit_wolf(const Eigen::MatrixXd& data);

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;          // d x p, orthonormal rows
    Eigen::VectorXd explained_variance;  // descending
};

// Top-d eigenvectors of cov; sign convention: largest-magnitude entry of each
// component is positive.
PcaModel pca_fit(const ShrunkCovariance& cov, const Eigen::VectorXd& mean, int d);

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& data);

// ---------------------------------------------------------------------------
// Wasserstein distances between customers' monthly profiles
// ---------------------------------------------------------------------------

// W1 between two equal-size sorted samples: mean |a_(j) - b_(j)|.
double wasserstein_1d(const std::vector<double>& a_sorted, const std::vector<double>& b_sorted);

// Per-customer, per-feature sorted standardized monthly samples.
struct TemporalProfiles {
    std::vector<int64_t> customer_ids;
    // sorted_values[c][f] = ascending K-vector for customer c, feature f
    std::vector<std::vector<std::vector<double>>> sorted_values;
};

// Standardizes each selected feature over all rows, then collects sorted
// per-customer samples. Throws if any customer is missing months.
TemporalProfiles build_profiles(const std::vector<CustomerMonth>& months,
                                const std::vector<int>& feature_indices, int k_months);

// Mean over features of per-feature W1.
double customer_distance(const TemporalProfiles& profiles, size_t i, size_t j);

// ---------------------------------------------------------------------------
// Delaunay triangulation + graph-restricted DBSCAN
// ---------------------------------------------------------------------------

struct DelaunayGraph {
    Eigen::MatrixXd points;                          // n x 2
    std::vector<std::pair<int, int>> edges;          // i < j, sorted
    std::vector<std::array<int, 3>> triangles;       // sorted indices per triangle
};

// Bowyer-Watson incremental triangulation. Duplicates merged at 1e-12;
// collinear inputs jittered once (1e-9, fixed seed) then rejected.
DelaunayGraph delaunay_triangulate(const Eigen::MatrixXd& points);

struct SegmentAssignment {
    std::vector<int> labels;  // -1 = noise
    int n_clusters = 0;
};

// DBSCAN whose candidate neighborhoods are Delaunay-adjacent points within
// eps under `dist`. Expansion in ascending point index.
SegmentAssignment wd_dbscan(const DelaunayGraph& graph,
                            const std::function<double(int, int)>& dist, double eps, int min_pts);

struct SegmentQuality {
    double ari = 0;           // NaN when all points are noise
    int n_clusters = 0;
    double noise_fraction = 0;
};

SegmentQuality segment_quality(const SegmentAssignment& labels, const std::vector<int>& truth);

// Chance-corrected partition agreement (general utility, also used by the
// intent scorer).
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// ---------------------------------------------------------------------------
// End-to-end stage
// ---------------------------------------------------------------------------

struct SegmentationConfig {
    int d = 2;                    // projection dimension (2 => planar Delaunay)
    double eps_percentile = 80;   // of Delaunay edge distances
    double eps_override = -1;     // > 0 takes precedence
    int min_pts = 3;
    // Temporal features entering the Wasserstein profile distance. Defaults to
    // the balance features: balances are slowly-varying stock variables that
    // reflect durable financial position, while the activity counts and the
    // delinquency flag are flow variables dominated by transient intent swings
    // that wash out segment structure. Empty => all features.
    std::vector<int> feature_indices{8, 9};
};

struct SegmentationResult {
    std::vector<int64_t> customer_ids;
    SegmentAssignment assignment;
    // Cluster id per customer with noise resolved to the nearest core point's
    // cluster and ids clamped to [0, kNumSegments) for the embedding table.
    std::vector<int> model_segment_ids;
    double eps = 0;
    int min_pts = 0;
    double shrinkage_delta = 0;
    Eigen::VectorXd explained_variance;
};

SegmentationResult run_segmentation(const std::vector<CustomerStatic>& statics,
                                    const std::vector<CustomerMonth>& months,
                                    const SegmentationConfig& config, int k_months);

void write_segments_json(const std::filesystem::path& path, const SegmentationResult& result);
SegmentationResult read_segments_json(const std::filesystem::path& path);

}  // namespace persona::segmentation
