#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dagsim {

/// A deterministic random stream identified by a root seed and a path of
/// child indices. Child streams are derived by hashing (parent key, child
/// index), never from the parent's consumed state, so split() is pure and the
/// same (seed, path) reproduces the same draws everywhere.
///
/// The generator behind each stream is xoshiro256** seeded through splitmix64.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0);

    RngStream split(std::uint64_t child) const;

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double next_uniform();
    double next_normal();

    std::uint64_t root_seed() const { return root_; }
    const std::vector<std::uint64_t>& path() const { return path_; }
    std::uint64_t key() const { return key_; }

private:
    RngStream(std::uint64_t root, std::vector<std::uint64_t> path, std::uint64_t key);
    void reseed();

    std::uint64_t root_ = 0;
    std::vector<std::uint64_t> path_;
    std::uint64_t key_ = 0;
    std::array<std::uint64_t, 4> s_{};
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

// Vector samplers. All throw InvalidParameter on bad parameters.

std::vector<double> draw_uniform(RngStream& rng, std::size_t n, double min = 0.0, double max = 1.0);
std::vector<double> draw_normal(RngStream& rng, std::size_t n, double mean, double sd);
/// Survival parameterisation S(t) = exp(-(t/scale)^shape), by inversion.
std::vector<double> draw_weibull(RngStream& rng, std::size_t n, double shape, double scale);
std::vector<double> draw_exponential(RngStream& rng, std::size_t n, double rate);
std::vector<double> draw_gamma(RngStream& rng, std::size_t n, double shape, double rate);
std::vector<double> draw_beta(RngStream& rng, std::size_t n, double a, double b);
std::vector<double> draw_poisson(RngStream& rng, std::size_t n, double rate);
/// Mean / dispersion parameterisation: variance = mean + mean^2 / dispersion.
std::vector<double> draw_negbinom(RngStream& rng, std::size_t n, double mean, double dispersion);

// Scalar samplers used when parameters vary per row.
double sample_gamma(RngStream& rng, double shape, double rate);
double sample_poisson(RngStream& rng, double rate);
double sample_negbinom(RngStream& rng, double mean, double dispersion);

/// One Bernoulli trial per entry of `p`, returned as 0/1. A probability
/// outside [0, 1] (or missing) throws ProbabilityOutOfRange naming the row.
std::vector<double> draw_bernoulli(RngStream& rng, std::span<const double> p);

/// One categorical draw per row of the row-major n x k matrix `probs`.
/// Rows must be non-negative and sum to 1 within `tolerance`, otherwise
/// RowNotNormalized (row and sum reported). Returns codes 0..k-1.
std::vector<int> draw_categorical(RngStream& rng, std::span<const double> probs, std::size_t k,
                                  double tolerance = 1e-8);

}  // namespace dagsim
