#pragma once

// Dense row-major kernels behind the autodiff ops and the clustering
// utilities. Every kernel in `swan::kernels` parallelizes over output rows
// with OpenMP; each output element is reduced by one thread in a fixed order,
// so results do not depend on the thread count. `swan::kernels::serial`
// holds the textbook loops the parallel versions are tested against.

#include <cstddef>
#include <cstdint>
#include <span>

namespace swan::kernels {

// c[m×n] = a[m×k] · b[k×n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

// out[k×n] += aᵀ · g, with a[m×k], g[m×n]
void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n);

// out[m×k] += g · bᵀ, with g[m×n], b[k×n]
void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n);

// Index of the nearest centroid (squared Euclidean) for every point; ties go to
// the lower centroid index. Returns the summed squared distance (inertia).
double assign_nearest(std::span<const double> points, std::span<const double> centroids,
                      std::span<std::uint32_t> assignment, std::size_t n, std::size_t k, std::size_t dim);

// out[n×k]: mean Euclidean distance from each point to the members of every
// cluster, excluding the point itself from its own cluster's mean.
void mean_cluster_distances(std::span<const double> points, std::span<const std::uint32_t> assignment,
                            std::span<const std::size_t> cluster_sizes, std::span<double> out,
                            std::size_t n, std::size_t k, std::size_t dim);

int max_threads();

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n);
double assign_nearest(std::span<const double> points, std::span<const double> centroids,
                      std::span<std::uint32_t> assignment, std::size_t n, std::size_t k, std::size_t dim);
void mean_cluster_distances(std::span<const double> points, std::span<const std::uint32_t> assignment,
                            std::span<const std::size_t> cluster_sizes, std::span<double> out,
                            std::size_t n, std::size_t k, std::size_t dim);

}  // namespace serial
}  // namespace swan::kernels
