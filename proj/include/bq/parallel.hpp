#pragma once

#include <cstddef>
#include <span>

namespace bq {

// Execution policy for the data-parallel kernels.  Both paths visit the same
// work items with the same per-item RNG streams and reduce in index order, so
// results are bitwise identical; the serial path is the reference.
enum class Exec { serial, parallel };

void set_thread_count(int n);
int thread_count();

// Resolves --threads / BQ_THREADS: a positive value wins, else the env var,
// else the OpenMP default.  Returns the count applied.
int configure_threads(int requested);

double pairwise_sum(std::span<const double> values) noexcept;

// Streaming mean/variance that merges deterministically (Chan et al.).
struct RunningStats {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept;
    void merge(const RunningStats& other) noexcept;
    double variance() const noexcept;  // unbiased
    double stderr_of_mean() const noexcept;
};

}  // namespace bq
