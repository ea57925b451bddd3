#include "swan/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "swan/error.hpp"
#include "swan/kernels.hpp"

namespace swan::cluster {

namespace {

std::size_t point_count(std::span<const double> points, std::size_t dim) {
    if (dim == 0) throw ArgumentError("cluster: dimension must be positive");
    if (points.size() % dim != 0) throw DimensionError("cluster: point buffer is not a multiple of the dimension");
    return points.size() / dim;
}

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> seed_centroids(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k,
                                   std::mt19937_64& rng) {
    std::vector<double> centroids;
    centroids.reserve(k * dim);
    const std::size_t first = static_cast<std::size_t>(rng() % n);
    centroids.insert(centroids.end(), points.begin() + first * dim, points.begin() + (first + 1) * dim);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        const double* last = centroids.data() + (c - 1) * dim;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], sq_dist(points.data() + i * dim, last, dim));
            total += best[i];
        }
        if (!(total > 0.0))
            throw ArgumentError("kmeans: only " + std::to_string(c) + " distinct points for k = " + std::to_string(k));
        const double target = uniform01(rng) * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (best[i] <= 0.0) continue;
            acc += best[i];
            pick = i;
            if (acc > target) break;
        }
        centroids.insert(centroids.end(), points.begin() + pick * dim, points.begin() + (pick + 1) * dim);
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters) {
    const std::size_t n = point_count(points, dim);
    if (k < 1 || k > n) throw ArgumentError("kmeans: k = " + std::to_string(k) + " for " + std::to_string(n) + " points");
    if (max_iters == 0) throw ArgumentError("kmeans: max_iters must be positive");
    std::mt19937_64 rng(seed);

    KMeansResult r;
    r.centroids = seed_centroids(points, n, dim, k, rng);
    r.assignment.assign(n, 0);
    std::vector<std::uint32_t> next(n);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < max_iters; ++it) {
        const double inertia = kernels::assign_nearest(points, r.centroids, next, n, k, dim);
        if (!r.inertia_history.empty() && inertia > r.inertia_history.back() * (1.0 + 1e-12) + 1e-300)
            throw std::logic_error("kmeans: inertia increased between iterations");
        const bool changed = it == 0 || next != r.assignment;
        r.assignment = next;
        r.inertia_history.push_back(inertia);
        r.iterations = it + 1;
        if (!changed) {
            r.converged = true;
            break;
        }
        std::vector<double> sums(k * dim, 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = r.assignment[i];
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += points[i * dim + d];
        }
        // An emptied cluster keeps its previous centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d)
                r.centroids[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
        }
    }
    return r;
}

double silhouette(std::span<const double> points, std::size_t dim, std::span<const std::uint32_t> assignment) {
    const std::size_t n = point_count(points, dim);
    if (assignment.size() != n) throw DimensionError("silhouette: one label per point required");
    if (n == 0) throw ArgumentError("silhouette: no points");
    const std::size_t k = static_cast<std::size_t>(*std::max_element(assignment.begin(), assignment.end())) + 1;
    if (k < 2) throw ArgumentError("silhouette: needs at least two clusters");
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignment) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c)
        if (sizes[c] == 0) throw ArgumentError("silhouette: cluster " + std::to_string(c) + " is empty");

    std::vector<double> mean(n * k);
    kernels::mean_cluster_distances(points, assignment, sizes, mean, n, k, dim);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = assignment[i];
        if (sizes[own] == 1) continue;
        const double a = mean[i * k + own];
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own) b = std::min(b, mean[i * k + c]);
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

KSweep choose_k(std::span<const double> points, std::size_t dim, std::span<const std::size_t> candidates,
                std::uint64_t seed, std::size_t restarts, std::size_t max_iters) {
    if (candidates.empty()) throw ArgumentError("choose_k: no candidate k");
    if (restarts == 0) throw ArgumentError("choose_k: restarts must be positive");
    KSweep sweep;
    sweep.candidates.assign(candidates.begin(), candidates.end());
    double best = -std::numeric_limits<double>::infinity();
    std::mt19937_64 seeds(seed);
    for (std::size_t k : candidates) {
        KMeansResult chosen;
        for (std::size_t r = 0; r < restarts; ++r) {
            KMeansResult run = kmeans(points, dim, k, seeds(), max_iters);
            if (r == 0 || run.inertia() < chosen.inertia()) chosen = std::move(run);
        }
        const double s = silhouette(points, dim, chosen.assignment);
        sweep.scores.push_back(s);
        if (s > best || (s == best && k < sweep.best_k)) {
            best = s;
            sweep.best_k = k;
        }
    }
    return sweep;
}

}  // namespace swan::cluster
