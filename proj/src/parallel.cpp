#include "bq/parallel.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <string>

namespace bq {

void set_thread_count(int n) {
    if (n > 0) omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

int configure_threads(int requested) {
    if (requested <= 0) {
        if (const char* env = std::getenv("BQ_THREADS")) {
            try {
                requested = std::stoi(env);
            } catch (const std::exception&) {
                requested = 0;
            }
        }
    }
    set_thread_count(requested);
    return thread_count();
}

double pairwise_sum(std::span<const double> values) noexcept {
    constexpr std::size_t kLeaf = 32;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

void RunningStats::add(double x) noexcept {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
}

void RunningStats::merge(const RunningStats& other) noexcept {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    const double n_a = static_cast<double>(count);
    const double n_b = static_cast<double>(other.count);
    const double n = n_a + n_b;
    const double delta = other.mean - mean;
    mean += delta * n_b / n;
    m2 += other.m2 + delta * delta * n_a * n_b / n;
    count += other.count;
}

double RunningStats::variance() const noexcept {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
}

double RunningStats::stderr_of_mean() const noexcept {
    return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

}  // namespace bq
