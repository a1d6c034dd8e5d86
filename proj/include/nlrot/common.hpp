#pragma once

// Shared vocabulary for the nlrot library: error types, angle conversion,
// deterministic seed derivation and a small parallel-for helper.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nlrot {

/// Invalid input data or a violated precondition. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative routine did not meet its tolerance. Maps to CLI exit code 3.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double pi = std::numbers::pi;

// Angles are radians everywhere inside the library; degrees only at I/O.
constexpr double deg(double degrees) { return degrees * pi / 180.0; }
constexpr double to_deg(double radians) { return radians * 180.0 / pi; }

/// Wraps an angle into (-pi, pi].
inline double wrap_pi(double a) {
    double w = std::remainder(a, 2.0 * pi);
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

// SplitMix64 finalizer. Used to derive independent per-stream seeds from a
// user seed so results do not depend on evaluation order or thread count.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t substream) {
    return derive_seed(derive_seed(seed, stream), substream);
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
/// fn must only write to slots owned by index i.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace nlrot
