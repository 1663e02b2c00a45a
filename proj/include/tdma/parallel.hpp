// SPDX-License-Identifier: Apache-2.0
//
// Deterministic chunked reductions. Sums are accumulated per 4096-element
// chunk and combined with a fixed pairwise tree, so the result is identical
// for any worker count.
#pragma once

#include <cstddef>
#include <future>
#include <thread>
#include <vector>

namespace tdma {

inline unsigned& detail_thread_count() {
    static unsigned n = 1;
    return n;
}

inline void set_thread_count(unsigned n) { detail_thread_count() = n == 0 ? 1 : n; }
inline unsigned thread_count() { return detail_thread_count(); }

inline constexpr std::size_t kReduceChunk = 4096;

namespace detail {

// Collapses partial sums pairwise: (a0+a1), (a2+a3), ... until one remains.
inline double pairwise_collapse(std::vector<double>& parts) {
    if (parts.empty()) return 0.0;
    std::size_t n = parts.size();
    while (n > 1) {
        std::size_t m = 0;
        for (std::size_t i = 0; i + 1 < n; i += 2) parts[m++] = parts[i] + parts[i + 1];
        if (n % 2 == 1) parts[m++] = parts[n - 1];
        n = m;
    }
    return parts[0];
}

}  // namespace detail

// Sum of f(i) over i in [0, n). f must be safe to call concurrently.
template <class F>
double indexed_sum(std::size_t n, F&& f) {
    if (n == 0) return 0.0;
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> parts(chunks, 0.0);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t lo = c * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += f(i);
        parts[c] = s;
    };
    const unsigned workers = std::min<std::size_t>(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::future<void>> tasks;
        tasks.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            tasks.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
            }));
        }
        for (auto& t : tasks) t.get();
    }
    return detail::pairwise_collapse(parts);
}

// Applies f(i) for i in [0, n); iterations must write disjoint state. Chunk
// assignment is static, so any worker count produces identical results.
template <class F>
void indexed_apply(std::size_t n, F&& f) {
    if (n == 0) return;
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    const unsigned workers = std::min<std::size_t>(thread_count(), chunks);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t lo = c * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        for (std::size_t i = lo; i < hi; ++i) f(i);
    };
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }
    std::vector<std::future<void>> tasks;
    tasks.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        tasks.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
        }));
    }
    for (auto& t : tasks) t.get();
}

// Vector-valued variant: accumulates `width` sums at once. f(i, acc) must add
// item i's contribution into acc[0..width).
template <class F>
std::vector<double> indexed_vector_sum(std::size_t n, std::size_t width, F&& f) {
    std::vector<double> out(width, 0.0);
    if (n == 0 || width == 0) return out;
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<std::vector<double>> parts(chunks);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t lo = c * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        std::vector<double> acc(width, 0.0);
        for (std::size_t i = lo; i < hi; ++i) f(i, acc.data());
        parts[c] = std::move(acc);
    };
    const unsigned workers = std::min<std::size_t>(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::future<void>> tasks;
        for (unsigned w = 0; w < workers; ++w) {
            tasks.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
            }));
        }
        for (auto& t : tasks) t.get();
    }
    for (std::size_t k = 0; k < width; ++k) {
        std::vector<double> col(chunks);
        for (std::size_t c = 0; c < chunks; ++c) col[c] = parts[c][k];
        out[k] = detail::pairwise_collapse(col);
    }
    return out;
}

}  // namespace tdma
