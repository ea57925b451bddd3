#pragma once

// k-means (k-means++ seeding, Lloyd iterations) and the silhouette sweep used
// to choose the number of item clusters. Points are row-major [n × dim];
// distances are Euclidean.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace swan::cluster {

struct KMeansResult {
    std::vector<std::uint32_t> assignment;
    std::vector<double> centroids;       // [k × dim]
    std::vector<double> inertia_history;  // after each assignment step
    std::size_t iterations = 0;
    bool converged = false;

    double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

// Throws ArgumentError for k < 1, k > n, or fewer than k distinct points.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 100);

// Mean silhouette coefficient. Labels must cover 0..k-1 with k >= 2;
// singleton clusters contribute 0.
double silhouette(std::span<const double> points, std::size_t dim, std::span<const std::uint32_t> assignment);

struct KSweep {
    std::size_t best_k = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> scores;
};

// Runs k-means (best inertia of `restarts` seeded runs) for every candidate
// and keeps the k with the highest silhouette; ties go to the smaller k.
KSweep choose_k(std::span<const double> points, std::size_t dim, std::span<const std::size_t> candidates,
                std::uint64_t seed, std::size_t restarts = 5, std::size_t max_iters = 100);

}  // namespace swan::cluster
