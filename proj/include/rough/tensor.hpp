// SPDX-License-Identifier: MIT
//
// Truncated free tensor algebra T^N(V) over an alphabet {1..d}: dense graded
// coefficient tables, concatenation / shuffle / ordered-shuffle products,
// deconcatenation and (ordered-)shuffle coproducts, symmetrization, tensor
// exp/log, the group-like (integration-by-parts) check, and the Lyndon-word
// machinery used to geometrize almost-group-like elements.
//
// Series are generic over the scalar: exact rationals for combinatorial
// identities, binary doubles for the analytic layer.  The scalar is fixed at
// construction (a template parameter), so mixing the two kinds is a compile
// error by design.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rough/words.hpp"

namespace rough::tensor {

using words::Multiset;
using words::Word;
using words::WordTuple;

/// Exact scalar used for all purely combinatorial identities.
using Rational = boost::multiprecision::cpp_rational;

template <class Scalar>
struct ScalarTraits {
    static constexpr bool exact = false;
    static double to_double(const Scalar& x) { return static_cast<double>(x); }
    static Scalar from_rational(const Rational& q) { return static_cast<Scalar>(static_cast<double>(q)); }
};

template <>
struct ScalarTraits<Rational> {
    static constexpr bool exact = true;
    static double to_double(const Rational& x) { return static_cast<double>(x); }
    static Rational from_rational(const Rational& q) { return q; }
};

template <class Scalar>
double abs_double(const Scalar& x) {
    const double v = ScalarTraits<Scalar>::to_double(x);
    return v < 0 ? -v : v;
}

// ---------------------------------------------------------------------------
// Word indexing within a dense level block
// ---------------------------------------------------------------------------

inline std::size_t level_size(int d, int n) {
    std::size_t s = 1;
    for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(d);
    return s;
}

/// Lexicographic rank of a word within its level: (w1..wn) -> sum (wi-1) d^{n-i}.
inline std::size_t word_rank(const Word& w, int d) {
    std::size_t r = 0;
    for (int c : w) r = r * static_cast<std::size_t>(d) + static_cast<std::size_t>(c - 1);
    return r;
}

inline Word word_unrank(std::size_t rank, int n, int d) {
    Word w(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        w[static_cast<std::size_t>(i)] = static_cast<int>(rank % static_cast<std::size_t>(d)) + 1;
        rank /= static_cast<std::size_t>(d);
    }
    return w;
}

// ---------------------------------------------------------------------------
// TensorSeries
// ---------------------------------------------------------------------------

/// Element of T^N(V): dense per-level coefficient arrays, level n indexed by
/// the lexicographic rank of its word.  Desk scale: N <= 6, d <= 4.
template <class Scalar>
class TensorSeries {
public:
    TensorSeries() : d_(1), cap_(0), levels_(1) {}

    TensorSeries(int d, int N) : d_(d), cap_(N) {
        if (d < 1) throw std::invalid_argument("TensorSeries: alphabet size must be >= 1");
        if (N < 0) throw std::invalid_argument("TensorSeries: level cap must be >= 0");
        levels_.resize(static_cast<std::size_t>(N) + 1);
        for (int n = 0; n <= N; ++n)
            levels_[static_cast<std::size_t>(n)].assign(level_size(d, n), Scalar(0));
    }

    static TensorSeries unit(int d, int N) {
        TensorSeries t(d, N);
        t.levels_[0][0] = Scalar(1);
        return t;
    }

    /// The basis element e_w (coefficient 1 at word w).
    static TensorSeries basis(int d, int N, const Word& w) {
        words::validate_word(w, d);
        if (static_cast<int>(w.size()) > N)
            throw std::invalid_argument("TensorSeries::basis: word longer than level cap");
        TensorSeries t(d, N);
        t.coeff(w) = Scalar(1);
        return t;
    }

    int dim() const { return d_; }
    int cap() const { return cap_; }

    const std::vector<Scalar>& level(int n) const { return levels_[static_cast<std::size_t>(n)]; }
    std::vector<Scalar>& level(int n) { return levels_[static_cast<std::size_t>(n)]; }

    const Scalar& coeff(const Word& w) const {
        return levels_[w.size()][word_rank(w, d_)];
    }
    Scalar& coeff(const Word& w) { return levels_[w.size()][word_rank(w, d_)]; }

    bool same_shape(const TensorSeries& o) const { return d_ == o.d_ && cap_ == o.cap_; }

    void check_shape(const TensorSeries& o, const char* what) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string(what) + ": shape mismatch (d or N differ)");
    }

    TensorSeries& operator+=(const TensorSeries& o) {
        check_shape(o, "TensorSeries::operator+=");
        for (std::size_t n = 0; n < levels_.size(); ++n)
            for (std::size_t r = 0; r < levels_[n].size(); ++r) levels_[n][r] += o.levels_[n][r];
        return *this;
    }

    TensorSeries& operator-=(const TensorSeries& o) {
        check_shape(o, "TensorSeries::operator-=");
        for (std::size_t n = 0; n < levels_.size(); ++n)
            for (std::size_t r = 0; r < levels_[n].size(); ++r) levels_[n][r] -= o.levels_[n][r];
        return *this;
    }

    TensorSeries& operator*=(const Scalar& s) {
        for (auto& lvl : levels_)
            for (auto& c : lvl) c *= s;
        return *this;
    }

    friend TensorSeries operator+(TensorSeries a, const TensorSeries& b) { return a += b; }
    friend TensorSeries operator-(TensorSeries a, const TensorSeries& b) { return a -= b; }
    friend TensorSeries operator*(TensorSeries a, const Scalar& s) { return a *= s; }
    friend TensorSeries operator*(const Scalar& s, TensorSeries a) { return a *= s; }

    bool operator==(const TensorSeries& o) const {
        return d_ == o.d_ && cap_ == o.cap_ && levels_ == o.levels_;
    }

    /// Largest |coefficient| (as double), optionally of a single level.
    double max_abs() const {
        double m = 0;
        for (const auto& lvl : levels_)
            for (const auto& c : lvl) m = std::max(m, abs_double(c));
        return m;
    }
    double max_abs_level(int n) const {
        double m = 0;
        for (const auto& c : levels_[static_cast<std::size_t>(n)]) m = std::max(m, abs_double(c));
        return m;
    }

    /// Copy with a different level cap (zero-padded or truncated).
    TensorSeries with_cap(int N2) const {
        TensorSeries out(d_, N2);
        for (int n = 0; n <= std::min(cap_, N2); ++n) out.levels_[static_cast<std::size_t>(n)] = levels_[static_cast<std::size_t>(n)];
        return out;
    }

    /// Zero out level 0 (the projection onto positive degree).
    TensorSeries positive_part() const {
        TensorSeries out = *this;
        out.levels_[0][0] = Scalar(0);
        return out;
    }

private:
    int d_;
    int cap_;
    std::vector<std::vector<Scalar>> levels_;
};

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

/// Truncated concatenation product: (a (x) b)^k = sum_{ij = k} a^i b^j.
template <class Scalar>
TensorSeries<Scalar> concat_mul(const TensorSeries<Scalar>& a, const TensorSeries<Scalar>& b) {
    a.check_shape(b, "concat_mul");
    const int d = a.dim(), N = a.cap();
    TensorSeries<Scalar> out(d, N);
    for (int n = 0; n <= N; ++n) {
        auto& lvl = out.level(n);
        for (int p = 0; p <= n; ++p) {
            const auto& la = a.level(p);
            const auto& lb = b.level(n - p);
            const std::size_t stride = level_size(d, n - p);
            for (std::size_t ra = 0; ra < la.size(); ++ra) {
                if (la[ra] == Scalar(0)) continue;
                for (std::size_t rb = 0; rb < lb.size(); ++rb) {
                    if (lb[rb] == Scalar(0)) continue;
                    lvl[ra * stride + rb] += la[ra] * lb[rb];
                }
            }
        }
    }
    return out;
}

/// Shuffle product: (a sh b)^k = sum over (i,j) in Sh^{-1}(k) of a^i b^j.
template <class Scalar>
TensorSeries<Scalar> shuffle_mul(const TensorSeries<Scalar>& a, const TensorSeries<Scalar>& b) {
    a.check_shape(b, "shuffle_mul");
    const int d = a.dim(), N = a.cap();
    TensorSeries<Scalar> out(d, N);
    for (int n = 0; n <= N; ++n) {
        auto& lvl = out.level(n);
        for (std::size_t r = 0; r < lvl.size(); ++r) {
            const Word k = word_unrank(r, n, d);
            Scalar acc(0);
            for (const auto& [pair, mult] : words::unshuffle_pairs(k, std::max(n, words::kDefaultLengthCap))) {
                const Scalar& ai = a.coeff(pair.first);
                if (ai == Scalar(0)) continue;
                const Scalar& bj = b.coeff(pair.second);
                if (bj == Scalar(0)) continue;
                acc += Scalar(static_cast<long>(mult)) * ai * bj;
            }
            lvl[r] = acc;
        }
    }
    return out;
}

/// Ordered-shuffle (Zinbiel half-shuffle) product: only nonempty factors
/// contribute, so any degree-0 parts of the arguments are ignored and the
/// output lives in degrees >= 2.  Iterated use is left-to-right.
template <class Scalar>
TensorSeries<Scalar> ordered_shuffle_mul(const TensorSeries<Scalar>& a,
                                         const TensorSeries<Scalar>& b) {
    a.check_shape(b, "ordered_shuffle_mul");
    const int d = a.dim(), N = a.cap();
    TensorSeries<Scalar> out(d, N);
    for (int n = 2; n <= N; ++n) {
        auto& lvl = out.level(n);
        for (std::size_t r = 0; r < lvl.size(); ++r) {
            const Word k = word_unrank(r, n, d);
            Scalar acc(0);
            for (const auto& [tuple, mult] : words::ordered_unshuffle(k, 2, std::max(n, words::kDefaultLengthCap))) {
                const Scalar& ai = a.coeff(tuple[0]);
                if (ai == Scalar(0)) continue;
                const Scalar& bj = b.coeff(tuple[1]);
                if (bj == Scalar(0)) continue;
                acc += Scalar(static_cast<long>(mult)) * ai * bj;
            }
            lvl[r] = acc;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// MultiTensor and coproducts
// ---------------------------------------------------------------------------

/// Sparse element of the m-fold external product T^N(V)^{(x) m}: tuples of
/// words mapping to scalars.  Kept sparse because the m-fold dense table
/// would blow up as d^{mN}.
template <class Scalar>
struct MultiTensor {
    int d = 1;
    int cap = 0;
    int arity = 1;
    std::map<WordTuple, Scalar> entries;

    Scalar coeff(const WordTuple& key) const {
        auto it = entries.find(key);
        return it == entries.end() ? Scalar(0) : it->second;
    }

    void add(const WordTuple& key, const Scalar& v) {
        if (v == Scalar(0)) return;
        auto [it, inserted] = entries.emplace(key, v);
        if (!inserted) {
            it->second += v;
            if (it->second == Scalar(0)) entries.erase(it);
        }
    }
};

/// m-fold deconcatenation: entry at (i1..im) is a^{i1 i2 ... im}.
template <class Scalar>
MultiTensor<Scalar> deconcat(const TensorSeries<Scalar>& a, int m) {
    if (m < 1) throw std::invalid_argument("deconcat: arity must be >= 1");
    MultiTensor<Scalar> out;
    out.d = a.dim();
    out.cap = a.cap();
    out.arity = m;
    for (int n = 0; n <= a.cap(); ++n) {
        for (std::size_t r = 0; r < a.level(n).size(); ++r) {
            const Scalar& v = a.level(n)[r];
            if (v == Scalar(0)) continue;
            const Word w = word_unrank(r, n, a.dim());
            // all m-part cuts of w: nondecreasing (m-1)-tuples of cut points
            std::vector<int> cuts(static_cast<std::size_t>(m - 1), 0);
            while (true) {
                WordTuple parts;
                int prev = 0;
                for (int c = 0; c < m - 1; ++c) {
                    const int cut = cuts[static_cast<std::size_t>(c)];
                    parts.emplace_back(w.begin() + prev, w.begin() + cut);
                    prev = cut;
                }
                parts.emplace_back(w.begin() + prev, w.end());
                out.add(parts, v);
                int c = m - 2;
                for (; c >= 0; --c) {
                    if (cuts[static_cast<std::size_t>(c)] < n) {
                        ++cuts[static_cast<std::size_t>(c)];
                        for (int c2 = c + 1; c2 < m - 1; ++c2)
                            cuts[static_cast<std::size_t>(c2)] = cuts[static_cast<std::size_t>(c)];
                        break;
                    }
                }
                if (c < 0) break;
            }
        }
    }
    return out;
}

namespace detail {

template <class Scalar>
void coproduct_accumulate(const TensorSeries<Scalar>& a, int m, bool reduced, bool ordered,
                          MultiTensor<Scalar>& out) {
    const int d = a.dim(), N = a.cap();
    for (int n = 0; n <= N; ++n) {
        // compositions of n into m parts: strictly positive if reduced,
        // otherwise weak (zeros allowed; obtained by shifting the positive
        // compositions of n+m down by one in every slot).
        std::vector<std::vector<int>> parts_list;
        if (reduced) {
            if (n < m) continue;
            parts_list = words::compositions(n, m);
        } else {
            parts_list = words::compositions(n + m, m);
            for (auto& parts : parts_list)
                for (int& p : parts) --p;
        }
        for (std::size_t r = 0; r < a.level(n).size(); ++r) {
            const Scalar& v = a.level(n)[r];
            if (v == Scalar(0)) continue;
            const Word w = word_unrank(r, n, d);
            for (const std::vector<int>& parts : parts_list) {
                const auto sigmas = ordered ? words::ordered_shuffles(parts, std::max(n, words::kDefaultLengthCap))
                                            : words::shuffles(parts, std::max(n, words::kDefaultLengthCap));
                for (const words::Permutation& sigma : sigmas) {
                    const Word img = words::apply_perm(sigma, w);
                    WordTuple tuple;
                    tuple.reserve(parts.size());
                    std::size_t at = 0;
                    for (int len : parts) {
                        tuple.emplace_back(img.begin() + static_cast<std::ptrdiff_t>(at),
                                           img.begin() + static_cast<std::ptrdiff_t>(at + len));
                        at += static_cast<std::size_t>(len);
                    }
                    out.add(tuple, v);
                }
            }
        }
    }
}

}  // namespace detail

/// m-output shuffle coproduct: entry at (k1..km) is sum_{k in Sh(k1..km)} a^k.
/// The reduced variant keeps only tuples with every block of degree >= 1.
template <class Scalar>
MultiTensor<Scalar> shuffle_coproduct(const TensorSeries<Scalar>& a, int m, bool reduced) {
    if (m < 1) throw std::invalid_argument("shuffle_coproduct: arity must be >= 1");
    MultiTensor<Scalar> out;
    out.d = a.dim();
    out.cap = a.cap();
    out.arity = m;
    detail::coproduct_accumulate(a, m, reduced, /*ordered=*/false, out);
    return out;
}

/// m-output ordered-shuffle coproduct (left-to-right iteration): entry at
/// (k1..km) is sum_{k in OSh(k1..km)} a^k.  The reduced variant keeps only
/// tuples with every block of degree >= 1.
template <class Scalar>
MultiTensor<Scalar> ordered_shuffle_coproduct(const TensorSeries<Scalar>& a, int m, bool reduced) {
    if (m < 1) throw std::invalid_argument("ordered_shuffle_coproduct: arity must be >= 1");
    MultiTensor<Scalar> out;
    out.d = a.dim();
    out.cap = a.cap();
    out.arity = m;
    detail::coproduct_accumulate(a, m, reduced, /*ordered=*/true, out);
    return out;
}

// ---------------------------------------------------------------------------
// Symmetrization, pairing
// ---------------------------------------------------------------------------

/// Symmetrization of a level-n block: (1/n!) sum over all permutations of the
/// letter slots.  Idempotent; exact in rational mode.
template <class Scalar>
std::vector<Scalar> symmetrize_level(const std::vector<Scalar>& block, int n, int d) {
    if (block.size() != level_size(d, n))
        throw std::invalid_argument("symmetrize_level: block size mismatch");
    if (n <= 1) return block;
    std::vector<Scalar> out(block.size(), Scalar(0));
    const std::vector<int> ones(static_cast<std::size_t>(n), 1);
    const auto perms = words::shuffles(ones);  // Sh(1,..,1) is all of S_n
    for (std::size_t r = 0; r < block.size(); ++r) {
        Scalar acc(0);
        const Word w = word_unrank(r, n, d);
        for (const words::Permutation& pi : perms) acc += block[word_rank(words::apply_perm(pi, w), d)];
        long fact = 1;
        for (int i = 2; i <= n; ++i) fact *= i;
        out[r] = acc / Scalar(fact);
    }
    return out;
}

/// Symmetrize every level of a series.
template <class Scalar>
TensorSeries<Scalar> symmetrize(const TensorSeries<Scalar>& a) {
    TensorSeries<Scalar> out = a;
    for (int n = 2; n <= a.cap(); ++n) out.level(n) = symmetrize_level(a.level(n), n, a.dim());
    return out;
}

/// Graded dual pairing realized as coefficientwise contraction.
template <class Scalar>
Scalar pair(const TensorSeries<Scalar>& a, const TensorSeries<Scalar>& b) {
    a.check_shape(b, "pair");
    Scalar acc(0);
    for (int n = 0; n <= a.cap(); ++n)
        for (std::size_t r = 0; r < a.level(n).size(); ++r) acc += a.level(n)[r] * b.level(n)[r];
    return acc;
}

/// Pairing of an m-fold coproduct value against m series: sum over tuples of
/// entry * prod_h b_h^{k_h}.
template <class Scalar>
Scalar pair(const MultiTensor<Scalar>& t, const std::vector<TensorSeries<Scalar>>& bs) {
    if (static_cast<int>(bs.size()) != t.arity)
        throw std::invalid_argument("pair: arity mismatch");
    for (const auto& b : bs)
        if (b.dim() != t.d) throw std::invalid_argument("pair: alphabet size mismatch");
    Scalar acc(0);
    for (const auto& [tuple, v] : t.entries) {
        Scalar prod = v;
        for (std::size_t h = 0; h < tuple.size(); ++h) {
            if (static_cast<int>(tuple[h].size()) > bs[h].cap()) { prod = Scalar(0); break; }
            prod *= bs[h].coeff(tuple[h]);
            if (prod == Scalar(0)) break;
        }
        acc += prod;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// exp / log / group-like check
// ---------------------------------------------------------------------------

/// Truncated tensor exponential of a series with zero constant term.
template <class Scalar>
TensorSeries<Scalar> exp_series(const TensorSeries<Scalar>& a) {
    if (!(a.level(0)[0] == Scalar(0)))
        throw std::invalid_argument("exp_series: input must have zero degree-0 term");
    const int N = a.cap();
    TensorSeries<Scalar> result = TensorSeries<Scalar>::unit(a.dim(), N);
    // Horner: exp(a) = 1 + a(1 + a/2 (1 + a/3 (...)))
    for (int k = N; k >= 1; --k) {
        TensorSeries<Scalar> scaled = concat_mul(a, result);
        scaled *= Scalar(1) / Scalar(k);
        result = TensorSeries<Scalar>::unit(a.dim(), N) + scaled;
    }
    return result;
}

/// Truncated tensor logarithm of a series with unit constant term.
template <class Scalar>
TensorSeries<Scalar> log_series(const TensorSeries<Scalar>& a) {
    if (!(a.level(0)[0] == Scalar(1)))
        throw std::invalid_argument("log_series: input must have unit degree-0 term");
    const int N = a.cap();
    const TensorSeries<Scalar> x = a - TensorSeries<Scalar>::unit(a.dim(), N);
    // Horner for log(1+x) = x(1 - x(1/2 - x(1/3 - ...)))
    TensorSeries<Scalar> result(a.dim(), N);
    for (int k = N; k >= 1; --k) {
        TensorSeries<Scalar> t = concat_mul(x, result);
        t *= Scalar(-1);
        TensorSeries<Scalar> unit_scaled = TensorSeries<Scalar>::unit(a.dim(), N);
        unit_scaled *= Scalar(1) / Scalar(k);
        result = unit_scaled + t;
    }
    result = concat_mul(x, result);
    return result;
}

struct GroupLikeReport {
    double max_defect = 0.0;   ///< worst |a^i a^j - sum_{k in Sh(i,j)} a^k|
    bool exact_zero = true;    ///< every defect exactly zero (meaningful in rational mode)
    Word worst_i, worst_j;
    bool pass(double tol) const { return max_defect <= tol; }
};

/// Integration-by-parts (shuffle) check: a^i a^j = sum_{k in Sh(i,j)} a^k for
/// all words with |i|, |j| >= 1 and |i|+|j| <= N.  Requires a^0 = 1.
template <class Scalar>
GroupLikeReport is_grouplike(const TensorSeries<Scalar>& a) {
    GroupLikeReport rep;
    const int d = a.dim(), N = a.cap();
    for (int p = 1; p < N; ++p) {
        for (int q = 1; p + q <= N; ++q) {
            for (std::size_t ri = 0; ri < level_size(d, p); ++ri) {
                const Word i = word_unrank(ri, p, d);
                for (std::size_t rj = 0; rj < level_size(d, q); ++rj) {
                    const Word j = word_unrank(rj, q, d);
                    Scalar rhs(0);
                    for (const auto& [k, mult] : words::shuffle_multiset(i, j))
                        rhs += Scalar(static_cast<long>(mult)) * a.coeff(k);
                    const Scalar defect = a.coeff(i) * a.coeff(j) - rhs;
                    if (!(defect == Scalar(0))) rep.exact_zero = false;
                    const double dd = abs_double(defect);
                    if (dd > rep.max_defect) {
                        rep.max_defect = dd;
                        rep.worst_i = i;
                        rep.worst_j = j;
                    }
                }
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Lyndon words and geometrization
// ---------------------------------------------------------------------------

/// True iff w is strictly lexicographically smaller than all proper rotations.
inline bool is_lyndon(const Word& w) {
    if (w.empty()) return false;
    const std::size_t n = w.size();
    for (std::size_t s = 1; s < n; ++s) {
        // compare w against its rotation by s
        for (std::size_t k = 0; k < n; ++k) {
            const int lhs = w[k];
            const int rhs = w[(k + s) % n];
            if (lhs < rhs) break;
            if (lhs > rhs) return false;
            if (k + 1 == n) return false;  // equal to a proper rotation
        }
    }
    return true;
}

/// All Lyndon words over {1..d} of length <= N, ordered by (length, lex).
/// Generation follows Duval's successor construction.
inline std::vector<Word> lyndon_words(int d, int N) {
    std::vector<Word> out;
    if (N < 1) return out;
    Word w{1};
    while (true) {
        if (static_cast<int>(w.size()) <= N) out.push_back(w);
        Word t;
        for (int i = 0; i < N; ++i) t.push_back(w[static_cast<std::size_t>(i) % w.size()]);
        while (!t.empty() && t.back() == d) t.pop_back();
        if (t.empty()) break;
        ++t.back();
        w = t;
    }
    std::sort(out.begin(), out.end(), [](const Word& a, const Word& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    return out;
}

/// Chen-Fox-Lyndon factorization: w = l1 l2 ... lk with l1 >= l2 >= ... >= lk
/// all Lyndon (Duval's linear-time algorithm).
inline std::vector<Word> cfl_factorization(const Word& w) {
    std::vector<Word> out;
    const int n = static_cast<int>(w.size());
    int i = 0;
    while (i < n) {
        int j = i + 1, k = i;
        while (j < n && w[static_cast<std::size_t>(k)] <= w[static_cast<std::size_t>(j)]) {
            if (w[static_cast<std::size_t>(k)] < w[static_cast<std::size_t>(j)])
                k = i;
            else
                ++k;
            ++j;
        }
        while (i <= k) {
            out.emplace_back(w.begin() + i, w.begin() + i + (j - k));
            i += j - k;
        }
    }
    return out;
}

/// One term of a shuffle-polynomial: coefficient * (l1 sh l2 sh ... sh lk).
using LyndonTerm = std::pair<Rational, std::vector<Word>>;
using LyndonPoly = std::vector<LyndonTerm>;

/// Precomputed Lyndon data for an alphabet/level pair: the word list and, for
/// every word, its exact expansion as a polynomial in shuffle products of
/// Lyndon words (the shuffle algebra is free over Lyndon words).
///
/// Normalization: each word's leading monomial is the shuffle product of its
/// Chen-Fox-Lyndon factors; remaining terms are found by greedy elimination
/// from the lexicographically greatest support word, which terminates because
/// that monomial equals a positive multiple of the word plus lex-smaller
/// words.
class LyndonBasis {
public:
    LyndonBasis(int d, int N) : d_(d), cap_(N), words_(lyndon_words(d, N)) {}

    int dim() const { return d_; }
    int cap() const { return cap_; }
    const std::vector<Word>& basis_words() const { return words_; }

    /// Exact decomposition of the delta-functional of w.
    const LyndonPoly& decompose(const Word& w) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(w);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(w, compute_decomposition(w)).first->second;
    }

private:
    LyndonPoly compute_decomposition(const Word& w) const {
        if (static_cast<int>(w.size()) > cap_)
            throw std::invalid_argument("LyndonBasis::decompose: word longer than level cap");
        words::validate_word(w, d_);
        LyndonPoly terms;
        if (w.empty()) {
            terms.emplace_back(Rational(1), std::vector<Word>{});
            return terms;
        }
        std::map<Word, Rational> residue;
        residue[w] = Rational(1);
        while (!residue.empty()) {
            const auto top = std::prev(residue.end());
            const Word v = top->first;
            const Rational cv = top->second;
            const std::vector<Word> factors = cfl_factorization(v);
            const Multiset monomial = words::shuffle_multiset(factors, std::max<int>(static_cast<int>(v.size()), words::kDefaultLengthCap));
            const auto diag_it = monomial.find(v);
            if (diag_it == monomial.end())
                throw std::logic_error("LyndonBasis: monomial misses its leading word");
            const Rational c = cv / Rational(diag_it->second);
            terms.emplace_back(c, factors);
            for (const auto& [u, mult] : monomial) {
                if (u > v) throw std::logic_error("LyndonBasis: elimination not triangular");
                auto [it2, inserted] = residue.emplace(u, Rational(0));
                it2->second -= c * Rational(mult);
                if (it2->second == 0) residue.erase(it2);
            }
        }
        return terms;
    }

    int d_;
    int cap_;
    std::vector<Word> words_;
    mutable std::mutex mutex_;
    mutable std::map<Word, LyndonPoly> cache_;
};

/// Shared per-(d,N) Lyndon basis cache (construction is deterministic).
inline const LyndonBasis& lyndon_basis(int d, int N) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<LyndonBasis>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{d, N}];
    if (!slot) slot = std::make_unique<LyndonBasis>(d, N);
    return *slot;
}

/// Decomposition of a single word (convenience wrapper over the cached basis).
inline const LyndonPoly& lyndon_decompose(const Word& w, int d, int N) {
    return lyndon_basis(d, N).decompose(w);
}

/// The unique group-like element agreeing with `a` on Lyndon words: every
/// coefficient is rebuilt from the Lyndon values through the shuffle-polynomial
/// decomposition, so in rational mode the result has exactly zero shuffle
/// defect.  Group-like inputs are fixed points.  Requires a^0 = 1.
template <class Scalar>
TensorSeries<Scalar> geometrize(const TensorSeries<Scalar>& a) {
    if (!(a.level(0)[0] == Scalar(1)))
        throw std::invalid_argument("geometrize: input must have unit degree-0 term");
    const int d = a.dim(), N = a.cap();
    const LyndonBasis& basis = lyndon_basis(d, N);
    TensorSeries<Scalar> out = TensorSeries<Scalar>::unit(d, N);
    for (int n = 1; n <= N; ++n) {
        for (std::size_t r = 0; r < level_size(d, n); ++r) {
            const Word w = word_unrank(r, n, d);
            Scalar acc(0);
            for (const auto& [c, factors] : basis.decompose(w)) {
                Scalar prod = ScalarTraits<Scalar>::from_rational(c);
                for (const Word& lam : factors) {
                    prod *= a.coeff(lam);
                    if (prod == Scalar(0)) break;
                }
                acc += prod;
            }
            out.level(n)[r] = acc;
        }
    }
    return out;
}

/// Same reconstruction from an explicit Lyndon-word value table.
template <class Scalar>
TensorSeries<Scalar> geometrize_from_lyndon(int d, int N, const std::map<Word, Scalar>& values) {
    TensorSeries<Scalar> seed = TensorSeries<Scalar>::unit(d, N);
    for (const auto& [w, v] : values) {
        if (!is_lyndon(w)) throw std::invalid_argument("geometrize_from_lyndon: key is not a Lyndon word");
        seed.coeff(w) = v;
    }
    return geometrize(seed);
}

}  // namespace rough::tensor
