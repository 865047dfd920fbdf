#include "dagsim/random.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dagsim/error.hpp"
#include "dagsim/table.hpp"

namespace dagsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::InvalidParameter, what);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : root_(seed), key_(mix64(seed ^ 0x6A09E667F3BCC908ULL)) {
    reseed();
}

RngStream::RngStream(std::uint64_t root, std::vector<std::uint64_t> path, std::uint64_t key)
    : root_(root), path_(std::move(path)), key_(key) {
    reseed();
}

void RngStream::reseed() {
    std::uint64_t x = key_;
    for (auto& word : s_) {
        x += kGolden;
        word = mix64(x);
    }
}

RngStream RngStream::split(std::uint64_t child) const {
    auto path = path_;
    path.push_back(child);
    const std::uint64_t k = mix64(key_ ^ mix64((child + 1) * kGolden));
    return RngStream(root_, std::move(path), k);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::next_uniform() {
    // 53 random bits centred in their cell: never 0, never 1
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::vector<double> draw_uniform(RngStream& rng, std::size_t n, double min, double max) {
    require(std::isfinite(min) && std::isfinite(max) && min < max, "uniform requires min < max");
    std::vector<double> out(n);
    for (auto& v : out) v = min + (max - min) * rng.next_uniform();
    return out;
}

std::vector<double> draw_normal(RngStream& rng, std::size_t n, double mean, double sd) {
    require(std::isfinite(mean), "normal mean must be finite");
    require(std::isfinite(sd) && sd > 0.0, "normal sd must be > 0");
    std::vector<double> out(n);
    for (auto& v : out) v = mean + sd * rng.next_normal();
    return out;
}

std::vector<double> draw_weibull(RngStream& rng, std::size_t n, double shape, double scale) {
    require(std::isfinite(shape) && shape > 0.0, "weibull shape must be > 0");
    require(std::isfinite(scale) && scale > 0.0, "weibull scale must be > 0");
    std::vector<double> out(n);
    const double inv = 1.0 / shape;
    for (auto& v : out) v = scale * std::pow(-std::log(rng.next_uniform()), inv);
    return out;
}

std::vector<double> draw_exponential(RngStream& rng, std::size_t n, double rate) {
    require(std::isfinite(rate) && rate > 0.0, "exponential rate must be > 0");
    std::vector<double> out(n);
    for (auto& v : out) v = -std::log(rng.next_uniform()) / rate;
    return out;
}

double sample_gamma(RngStream& rng, double shape, double rate) {
    if (shape < 1.0) {
        // boost to shape + 1 and correct with U^(1/shape)
        const double g = sample_gamma(rng, shape + 1.0, 1.0);
        return g * std::pow(rng.next_uniform(), 1.0 / shape) / rate;
    }
    // Marsaglia & Tsang squeeze
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x;
        double v;
        do {
            x = rng.next_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.next_uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

std::vector<double> draw_gamma(RngStream& rng, std::size_t n, double shape, double rate) {
    require(std::isfinite(shape) && shape > 0.0, "gamma shape must be > 0");
    require(std::isfinite(rate) && rate > 0.0, "gamma rate must be > 0");
    std::vector<double> out(n);
    for (auto& v : out) v = sample_gamma(rng, shape, rate);
    return out;
}

std::vector<double> draw_beta(RngStream& rng, std::size_t n, double a, double b) {
    require(std::isfinite(a) && a > 0.0, "beta shape1 must be > 0");
    require(std::isfinite(b) && b > 0.0, "beta shape2 must be > 0");
    std::vector<double> out(n);
    for (auto& v : out) {
        const double x = sample_gamma(rng, a, 1.0);
        const double y = sample_gamma(rng, b, 1.0);
        v = x / (x + y);
    }
    return out;
}

double sample_poisson(RngStream& rng, double rate) {
    if (rate <= 0.0) return 0.0;
    if (rate < 10.0) {
        // sequential inversion from zero
        const double u = rng.next_uniform();
        double p = std::exp(-rate);
        double cdf = p;
        double k = 0.0;
        while (u > cdf) {
            k += 1.0;
            p *= rate / k;
            cdf += p;
            if (p <= 0.0 && cdf < u) break;  // tail underflow
        }
        return k;
    }
    // Hoermann's transformed rejection with squeeze (PTRS)
    const double smu = std::sqrt(rate);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double log_rate = std::log(rate);
    while (true) {
        const double u = rng.next_uniform() - 0.5;
        const double v = rng.next_uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -rate + k * log_rate - std::lgamma(k + 1.0))
            return k;
    }
}

std::vector<double> draw_poisson(RngStream& rng, std::size_t n, double rate) {
    require(std::isfinite(rate) && rate >= 0.0, "poisson rate must be >= 0");
    std::vector<double> out(n);
    for (auto& v : out) v = sample_poisson(rng, rate);
    return out;
}

double sample_negbinom(RngStream& rng, double mean, double dispersion) {
    if (mean <= 0.0) return 0.0;
    const double lambda = sample_gamma(rng, dispersion, dispersion / mean);
    return sample_poisson(rng, lambda);
}

std::vector<double> draw_negbinom(RngStream& rng, std::size_t n, double mean, double dispersion) {
    require(std::isfinite(mean) && mean >= 0.0, "negative binomial mean must be >= 0");
    require(std::isfinite(dispersion) && dispersion > 0.0, "negative binomial dispersion must be > 0");
    std::vector<double> out(n);
    for (auto& v : out) v = sample_negbinom(rng, mean, dispersion);
    return out;
}

std::vector<double> draw_bernoulli(RngStream& rng, std::span<const double> p) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i];
        if (!(pi >= 0.0 && pi <= 1.0))
            fail(ErrorCode::ProbabilityOutOfRange,
                 "probability " + format_number(pi) + " at row " + std::to_string(i + 1));
        out[i] = rng.next_uniform() < pi ? 1.0 : 0.0;
    }
    return out;
}

std::vector<int> draw_categorical(RngStream& rng, std::span<const double> probs, std::size_t k,
                                  double tolerance) {
    require(k > 0, "categorical draw needs at least one category");
    require(probs.size() % k == 0, "probability matrix size is not a multiple of the category count");
    const std::size_t n = probs.size() / k;
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = probs.data() + i * k;
        double sum = 0.0;
        bool negative = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (!(row[c] >= 0.0)) negative = true;
            sum += row[c];
        }
        if (negative || !(std::abs(sum - 1.0) <= tolerance))
            fail(ErrorCode::RowNotNormalized,
                 "row " + std::to_string(i + 1) + " sums to " + format_number(sum) +
                     (negative ? " (or has a negative/missing entry)" : ""));
        const double u = rng.next_uniform() * sum;
        double cum = 0.0;
        int pick = -1;
        for (std::size_t c = 0; c < k; ++c) {
            cum += row[c];
            if (u < cum) {
                pick = static_cast<int>(c);
                break;
            }
        }
        if (pick < 0) {
            // rounding left u at the very top; take the last category with mass
            for (std::size_t c = k; c-- > 0;)
                if (row[c] > 0.0) {
                    pick = static_cast<int>(c);
                    break;
                }
        }
        out[i] = pick;
    }
    return out;
}

}  // namespace dagsim
