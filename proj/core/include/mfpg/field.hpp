#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfpg {

// Dense grid field indexed by (type, common path, time index). Deterministic
// solver modes use n_common = 1. Time index runs over nodes (M+1) for value
// processes and over cells (M) for integrands.
struct Field {
    std::size_t n_types = 0, n_common = 0, n_time = 0;
    std::vector<double> v;

    Field() = default;
    Field(std::size_t K, std::size_t C, std::size_t Mt, double init = 0.0)
        : n_types(K), n_common(C), n_time(Mt), v(K * C * Mt, init) {}

    double& at(std::size_t k, std::size_t c, std::size_t m) { return v[(k * n_common + c) * n_time + m]; }
    double at(std::size_t k, std::size_t c, std::size_t m) const { return v[(k * n_common + c) * n_time + m]; }

    std::span<double> row(std::size_t k, std::size_t c) {
        return {v.data() + (k * n_common + c) * n_time, n_time};
    }
    std::span<const double> row(std::size_t k, std::size_t c) const {
        return {v.data() + (k * n_common + c) * n_time, n_time};
    }

    bool same_shape(const Field& o) const {
        return n_types == o.n_types && n_common == o.n_common && n_time == o.n_time;
    }
};

// Deterministic pairwise summation: the reduction tree depends only on the
// length, never on thread count or iteration order.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double t : x) s += t;
        return s;
    }
    std::size_t half = x.size() / 2;
    return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

inline double sup_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        double d = a.v[i] - b.v[i];
        if (d < 0) d = -d;
        if (d > m) m = d;
    }
    return m;
}

inline double sup_abs(const Field& a) {
    double m = 0.0;
    for (double t : a.v) {
        if (t < 0) t = -t;
        if (t > m) m = t;
    }
    return m;
}

} // namespace mfpg
