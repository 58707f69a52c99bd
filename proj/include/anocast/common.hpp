#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace anocast {

// ---------------------------------------------------------------------------
// Error taxonomy. Every throwing path in the library uses one of these so
// callers (and tests) can distinguish bad shapes from bad configs from
// genuinely broken runtime state.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand dimensions do not conform.
struct ShapeError : Error {
    using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

// Invalid configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// Unusable input data (empty set, too few samples, ...).
struct DataError : Error {
    using Error::Error;
};

// Data that is technically present but statistically degenerate
// (e.g. zero variance where a scale is required).
struct DegenerateDataError : DataError {
    using DataError::DataError;
};

// Object is not in a state that allows the call (untrained model,
// non-finite numeric state, ...).
struct StateError : Error {
    using Error::Error;
};

// Numerical blow-up during integration or training.
struct DivergenceError : Error {
    using Error::Error;
};

// Training produced an unusable update (non-finite gradient, ...).
struct TrainingError : Error {
    using Error::Error;
};

// Malformed input file.
struct ParseError : Error {
    using Error::Error;
};

// A pipeline stage failed; the message names the stage and wraps the cause.
struct StageError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic random source. All randomness in the library flows through
// this class so that a single seed reproduces every run bit for bit.
// The uniform/normal mappings are written out by hand instead of going
// through std distributions, whose output is implementation-defined.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw ContractError("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    std::size_t index(std::size_t n) {
        if (n == 0) throw ContractError("index: n must be positive");
        return static_cast<std::size_t>(gen_() % n);
    }

    // standard normal via Box-Muller, one value cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

    // Derives an independent stream seed from a master seed and a tag.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline bool is_finite(double v) { return std::isfinite(v); }

} // namespace anocast
