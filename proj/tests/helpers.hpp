#pragma once

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dagsim/error.hpp"
#include "dagsim/table.hpp"

namespace testing {

inline dagsim::DataTable table_of(std::initializer_list<std::pair<std::string, std::vector<double>>> cols,
                                  dagsim::ColumnType type = dagsim::ColumnType::Real) {
    std::size_t n = cols.size() ? cols.begin()->second.size() : 0;
    dagsim::DataTable t(n);
    for (const auto& [name, values] : cols) t.set(name, dagsim::Column(type, values));
    return t;
}

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::vector<double> values(const dagsim::Column& c) { return {c.values().begin(), c.values().end()}; }

inline std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

/// Upper tail of the chi-square distribution (regularised incomplete gamma).
inline double chi_square_p(double x, double df) {
    const double a = df / 2.0, z = x / 2.0;
    if (z <= 0) return 1.0;
    if (z < a + 1) {
        double sum = 1.0 / a, term = sum;
        for (int k = 1; k < 1000; ++k) {
            term *= z / (a + k);
            sum += term;
            if (term < sum * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-z + a * std::log(z) - std::lgamma(a));
    }
    // continued fraction for Q
    double b = z + 1 - a, c = 1e300, d = 1 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1) < 1e-15) break;
    }
    return std::exp(-z + a * std::log(z) - std::lgamma(a)) * h;
}

}  // namespace testing

#define CHECK_THROWS_CODE(expr, expected)                                   \
    do {                                                                    \
        bool thrown_ = false;                                               \
        try {                                                               \
            (void)(expr);                                                   \
        } catch (const dagsim::Error& e_) {                                 \
            thrown_ = true;                                                 \
            CHECK_MESSAGE(e_.code() == (expected), e_.what());              \
        }                                                                   \
        CHECK_MESSAGE(thrown_, "expected " #expected " from " #expr);       \
    } while (0)
