#include "swan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swan::kernels {

namespace {

inline double sq_dist(const double* x, const double* y, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = x[d] - y[d];
        s += diff * diff;
    }
    return s;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel if (m * k * n > 32768)
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double* arow = pa + i * static_cast<std::ptrdiff_t>(k);
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* brow = pb + p * n;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
            }
            std::copy(acc.begin(), acc.end(), pc + i * static_cast<std::ptrdiff_t>(n));
        }
    }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n) {
    const double* pa = a.data();
    const double* pg = g.data();
    double* po = out.data();
    const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel if (m * k * n > 32768)
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t r = 0; r < m; ++r) {
                const double av = pa[r * k + static_cast<std::size_t>(i)];
                const double* grow = pg + r * n;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * grow[j];
            }
            double* orow = po + static_cast<std::size_t>(i) * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += acc[j];
        }
    }
}

void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n) {
    const double* pg = g.data();
    double* po = out.data();
    // bᵀ turns the per-element dot products into contiguous row updates. Each
    // element still sums its n terms from zero in j order, as the serial loop does.
    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    const double* pbt = bt.data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel if (m * k * n > 32768)
    {
        std::vector<double> acc(k);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double* grow = pg + static_cast<std::size_t>(i) * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double gv = grow[j];
                const double* btrow = pbt + j * k;
                for (std::size_t p = 0; p < k; ++p) acc[p] += gv * btrow[p];
            }
            double* orow = po + static_cast<std::size_t>(i) * k;
            for (std::size_t p = 0; p < k; ++p) orow[p] += acc[p];
        }
    }
}

double assign_nearest(std::span<const double> points, std::span<const double> centroids,
                      std::span<std::uint32_t> assignment, std::size_t n, std::size_t k, std::size_t dim) {
    std::vector<double> best(n);
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * k * dim > 32768)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double* x = points.data() + static_cast<std::size_t>(i) * dim;
        double best_d = std::numeric_limits<double>::infinity();
        std::uint32_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double d = sq_dist(x, centroids.data() + c * dim, dim);
            if (d < best_d) {
                best_d = d;
                best_c = static_cast<std::uint32_t>(c);
            }
        }
        assignment[static_cast<std::size_t>(i)] = best_c;
        best[static_cast<std::size_t>(i)] = best_d;
    }
    double inertia = 0.0;
    for (double d : best) inertia += d;
    return inertia;
}

void mean_cluster_distances(std::span<const double> points, std::span<const std::uint32_t> assignment,
                            std::span<const std::size_t> cluster_sizes, std::span<double> out,
                            std::size_t n, std::size_t k, std::size_t dim) {
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel if (n * n * dim > 32768)
    {
        std::vector<double> sums(k);
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            std::fill(sums.begin(), sums.end(), 0.0);
            const double* x = points.data() + i * dim;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                sums[assignment[j]] += std::sqrt(sq_dist(x, points.data() + j * dim, dim));
            }
            for (std::size_t c = 0; c < k; ++c) {
                const std::size_t count = cluster_sizes[c] - (assignment[i] == c ? 1 : 0);
                out[i * k + c] = count == 0 ? 0.0 : sums[c] / static_cast<double>(count);
            }
        }
    }
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
    }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < m; ++r) s += a[r * k + i] * g[r * n + j];
            out[i * n + j] += s;
        }
    }
}

void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b[p * n + j];
            out[i * k + p] += s;
        }
    }
}

double assign_nearest(std::span<const double> points, std::span<const double> centroids,
                      std::span<std::uint32_t> assignment, std::size_t n, std::size_t k, std::size_t dim) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        std::uint32_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            double d = 0.0;
            for (std::size_t t = 0; t < dim; ++t) {
                const double diff = points[i * dim + t] - centroids[c * dim + t];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best_c = static_cast<std::uint32_t>(c);
            }
        }
        assignment[i] = best_c;
        inertia += best_d;
    }
    return inertia;
}

void mean_cluster_distances(std::span<const double> points, std::span<const std::uint32_t> assignment,
                            std::span<const std::size_t> cluster_sizes, std::span<double> out,
                            std::size_t n, std::size_t k, std::size_t dim) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || assignment[j] != c) continue;
                double d = 0.0;
                for (std::size_t t = 0; t < dim; ++t) {
                    const double diff = points[i * dim + t] - points[j * dim + t];
                    d += diff * diff;
                }
                sum += std::sqrt(d);
            }
            const std::size_t count = cluster_sizes[c] - (assignment[i] == c ? 1 : 0);
            out[i * k + c] = count == 0 ? 0.0 : sum / static_cast<double>(count);
        }
    }
}

}  // namespace serial
}  // namespace swan::kernels
