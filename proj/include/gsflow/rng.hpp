#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace gsflow {

/// Derives an independent seed for a named sub-stream so that consumers
/// (dataset, teacher, candidate, cvae, actor, env, eval, ...) never share
/// generator state.
uint64_t stream_seed(uint64_t seed, std::string_view name);

/// Keeps large Eigen temporaries in the malloc arena instead of per-call
/// mmap/munmap cycles; call once at process start in training entry points.
void tune_allocator();

/// Seeded random stream with fully specified draw semantics: uniforms are
/// 53-bit doubles from the raw engine, normals come from Box-Muller (two
/// uniforms per draw, no cached spare). State is exactly the mt19937_64
/// engine and serializes to text for checkpoints.
class RandomStream {
public:
    RandomStream() : engine_(0) {}
    explicit RandomStream(uint64_t seed) : engine_(seed) {}
    static RandomStream for_stream(uint64_t seed, std::string_view name) {
        return RandomStream(stream_seed(seed, name));
    }

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log() argument.
    double uniform_open() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, bound) by rejection.
    uint64_t integer(uint64_t bound);

    /// Standard normal via Box-Muller.
    double normal();

    Eigen::VectorXd normal_vec(int n);
    /// Column-major fill order.
    Eigen::MatrixXd normal_mat(int rows, int cols);
    Eigen::VectorXd uniform_vec(int n, double lo, double hi);

    std::string serialize() const;
    void deserialize(const std::string& text);

    bool operator==(const RandomStream& o) const { return engine_ == o.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace gsflow
