// SPDX-License-Identifier: MIT
//
// Independent brute-force references used by the test suite: nested
// Riemann-Stieltjes iterated integrals on sampled paths, the shuffle product
// evaluated literally from its permutation definition, and finite-difference
// jets for validating analytic derivative tables.
//
// This header deliberately includes nothing else from the library and reuses
// none of its enumeration or quadrature code: independence is the point.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rough::oracle {

/// A sampled path: strictly increasing times with values in R^d.
struct SampledPath {
    std::vector<double> times;
    std::vector<std::vector<double>> values;

    std::size_t size() const { return times.size(); }
    std::size_t dim() const { return values.empty() ? 0 : values.front().size(); }

    void validate() const {
        if (times.size() != values.size())
            throw std::invalid_argument("SampledPath: times/values length mismatch");
        for (std::size_t i = 0; i + 1 < times.size(); ++i)
            if (!(times[i] < times[i + 1]))
                throw std::invalid_argument("SampledPath: times must be strictly increasing");
        for (const auto& v : values)
            if (v.size() != dim())
                throw std::invalid_argument("SampledPath: ragged value rows");
    }
};

/// Nested left-point sums over the discrete simplex l1 < l2 < ... < ln:
///
///   I_() == 1,   I_(w,j)(t_k) = sum_{l < k} I_w(t_l) * (X^j_{l+1} - X^j_l),
///
/// returned at the final time.  Error is O(mesh) against the smooth integral.
/// Guards: |word| <= 3 and grid <= grid_cap points (default 500).
inline double riemann_iterated(const SampledPath& path, const std::vector<int>& word,
                               std::size_t grid_cap = 500) {
    path.validate();
    if (word.size() > 3)
        throw std::invalid_argument("riemann_iterated: word length cap (3) exceeded");
    if (path.size() > grid_cap)
        throw std::invalid_argument("riemann_iterated: grid cap exceeded");
    for (int c : word)
        if (c < 1 || c > static_cast<int>(path.dim()))
            throw std::invalid_argument("riemann_iterated: letter outside path dimension");

    const std::size_t n = path.size();
    if (n == 0) return word.empty() ? 1.0 : 0.0;
    // running[k] = I_prefix(t_k); start with the empty word.
    std::vector<double> running(n, 1.0);
    for (int letter : word) {
        std::vector<double> next(n, 0.0);
        double acc = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const std::size_t j = static_cast<std::size_t>(letter - 1);
            acc += running[k - 1] * (path.values[k][j] - path.values[k - 1][j]);
            next[k] = acc;
        }
        running = std::move(next);
    }
    return running[n - 1];
}

namespace detail {

// Increasing-on-both-blocks test straight from the definition, on one-line
// permutation images of {1..n}.
inline bool increasing_on_blocks(const std::vector<int>& image, int n1) {
    for (int k = 1; k < n1; ++k)
        if (image[static_cast<std::size_t>(k - 1)] > image[static_cast<std::size_t>(k)]) return false;
    for (int k = n1 + 1; k < static_cast<int>(image.size()); ++k)
        if (image[static_cast<std::size_t>(k - 1)] > image[static_cast<std::size_t>(k)]) return false;
    return true;
}

}  // namespace detail

/// Every permutation of {1..n} in one-line notation (lexicographic order).
inline std::vector<std::vector<int>> all_permutations(int n) {
    std::vector<int> image(static_cast<std::size_t>(n));
    std::iota(image.begin(), image.end(), 1);
    std::vector<std::vector<int>> out;
    do {
        out.push_back(image);
    } while (std::next_permutation(image.begin(), image.end()));
    return out;
}

/// The shuffle product evaluated literally: for words i, j it walks ALL of
/// S_{|i|+|j|}, keeps the permutations increasing on the two blocks, and adds
/// a_i * b_j onto the coefficient of sigma^{-1}_*(ij).  Inputs and output are
/// plain word->coefficient maps so no library code is touched.
template <class Scalar>
std::map<std::vector<int>, Scalar> brute_shuffle(const std::map<std::vector<int>, Scalar>& a,
                                                 const std::map<std::vector<int>, Scalar>& b,
                                                 int degree_cap = 6) {
    std::map<std::vector<int>, Scalar> out;
    for (const auto& [wi, ai] : a) {
        for (const auto& [wj, bj] : b) {
            const int n1 = static_cast<int>(wi.size());
            const int n = n1 + static_cast<int>(wj.size());
            if (n > degree_cap)
                throw std::invalid_argument("brute_shuffle: degree cap exceeded");
            std::vector<int> cat = wi;
            cat.insert(cat.end(), wj.begin(), wj.end());
            if (n == 0) {
                out[{}] += ai * bj;
                continue;
            }
            for (const std::vector<int>& image : all_permutations(n)) {
                if (!detail::increasing_on_blocks(image, n1)) continue;
                // inverse pushforward: word w with w[image[q]-1] = cat[q]
                std::vector<int> w(static_cast<std::size_t>(n));
                for (int q = 0; q < n; ++q)
                    w[static_cast<std::size_t>(image[static_cast<std::size_t>(q)] - 1)] =
                        cat[static_cast<std::size_t>(q)];
                out[w] += ai * bj;
            }
        }
    }
    // Drop exact zeros so map equality means coefficient equality.
    for (auto it = out.begin(); it != out.end();) {
        if (it->second == Scalar(0))
            it = out.erase(it);
        else
            ++it;
    }
    return out;
}

/// Central finite-difference jet of a black-box map: for word (g1..gn),
/// differentiates in g1 by central differences of the (g2..gn) jet.
/// Relative accuracy ~1e-4 at h = 1e-4 scale for smooth maps; |word| <= 3.
inline double fd_jet(const std::function<double(const std::vector<double>&)>& f,
                     std::vector<double> x, const std::vector<int>& word, double h = 1e-4) {
    if (word.size() > 3) throw std::invalid_argument("fd_jet: word length cap (3) exceeded");
    if (word.empty()) return f(x);
    const std::size_t j = static_cast<std::size_t>(word.front() - 1);
    if (j >= x.size()) throw std::invalid_argument("fd_jet: letter outside domain dimension");
    const std::vector<int> tail(word.begin() + 1, word.end());
    x[j] += h;
    const double up = fd_jet(f, x, tail, h);
    x[j] -= 2 * h;
    const double down = fd_jet(f, x, tail, h);
    return (up - down) / (2 * h);
}

}  // namespace rough::oracle
