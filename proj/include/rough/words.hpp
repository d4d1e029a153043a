// SPDX-License-Identifier: MIT
//
// Words, permutations, shuffles and ordered shuffles.
//
// A word is a tuple of letters from {1..d}; the empty word is a first-class
// value.  Shuffles Sh(n1..nm) are the permutations of {1..n} that are
// increasing on each of the m consecutive blocks; ordered shuffles OSh
// additionally require the images of the block endpoints to be increasing.
// On top of these we build the multiset constructions (shuffle multisets,
// unshuffles and their ordered variants) that drive every coordinate formula
// in the rest of the library.
//
// All multisets are stored as sorted-key count maps; equality of multisets is
// exact integer equality of every multiplicity.  Everything here is pure and
// immutable, so concurrent use needs no coordination.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rough::words {

/// A word: letters in {1..d}.  Empty words are allowed everywhere.
using Word = std::vector<int>;
using WordPair = std::pair<Word, Word>;
using WordTuple = std::vector<Word>;

/// Multiset of words / pairs / tuples: key -> strictly positive multiplicity.
using Multiset = std::map<Word, std::int64_t>;
using PairMultiset = std::map<WordPair, std::int64_t>;
using TupleMultiset = std::map<WordTuple, std::int64_t>;

/// Default guard against combinatorial blow-up: total length of enumerated
/// words.  Exceeding a cap is an error, never a silent truncation.
inline constexpr int kDefaultLengthCap = 8;

inline void check_cap(int total, int cap, const char* what) {
    if (total > cap) {
        throw std::invalid_argument(std::string(what) + ": total length " +
                                    std::to_string(total) + " exceeds enumeration cap " +
                                    std::to_string(cap));
    }
}

/// Throws unless every letter of `w` lies in {1..d}.
inline void validate_word(const Word& w, int d) {
    for (int c : w) {
        if (c < 1 || c > d) {
            throw std::invalid_argument("word letter " + std::to_string(c) +
                                        " outside alphabet {1.." + std::to_string(d) + "}");
        }
    }
}

inline Word concat(const Word& a, const Word& b) {
    Word out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline Word concat(const WordTuple& parts) {
    Word out;
    for (const Word& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

/// Permutation of {1..n} in one-line notation: image[k-1] = sigma(k).
struct Permutation {
    std::vector<int> image;

    Permutation() = default;
    explicit Permutation(std::vector<int> img) : image(std::move(img)) {
        if (!is_bijection()) throw std::invalid_argument("permutation image is not a bijection");
    }

    static Permutation identity(int n) {
        std::vector<int> img(static_cast<std::size_t>(n));
        std::iota(img.begin(), img.end(), 1);
        Permutation p;
        p.image = std::move(img);
        return p;
    }

    int degree() const { return static_cast<int>(image.size()); }

    int operator()(int k) const { return image[static_cast<std::size_t>(k - 1)]; }

    Permutation inverse() const {
        Permutation inv;
        inv.image.assign(image.size(), 0);
        for (std::size_t k = 0; k < image.size(); ++k)
            inv.image[static_cast<std::size_t>(image[k] - 1)] = static_cast<int>(k + 1);
        return inv;
    }

    bool is_bijection() const {
        std::vector<bool> seen(image.size(), false);
        for (int v : image) {
            if (v < 1 || v > static_cast<int>(image.size()) || seen[static_cast<std::size_t>(v - 1)])
                return false;
            seen[static_cast<std::size_t>(v - 1)] = true;
        }
        return true;
    }

    bool operator==(const Permutation& o) const { return image == o.image; }
    bool operator<(const Permutation& o) const { return image < o.image; }
};

/// (sigma . rho)(k) = sigma(rho(k)).  Pushforwards compose contravariantly:
/// apply_perm(compose(sigma, rho), w) == apply_perm(rho, apply_perm(sigma, w)).
inline Permutation compose_perms(const Permutation& sigma, const Permutation& rho) {
    if (sigma.degree() != rho.degree())
        throw std::invalid_argument("compose_perms: degree mismatch");
    Permutation out;
    out.image.resize(sigma.image.size());
    for (int k = 1; k <= rho.degree(); ++k)
        out.image[static_cast<std::size_t>(k - 1)] = sigma(rho(k));
    return out;
}

/// Pushforward of a word: rho_* w = (w_{rho(1)}, ..., w_{rho(n)}).
inline Word apply_perm(const Permutation& rho, const Word& w) {
    if (rho.degree() != static_cast<int>(w.size()))
        throw std::invalid_argument("apply_perm: length mismatch");
    Word out(w.size());
    for (std::size_t q = 0; q < w.size(); ++q)
        out[q] = w[static_cast<std::size_t>(rho.image[q] - 1)];
    return out;
}

// ---------------------------------------------------------------------------
// Shuffle enumeration
// ---------------------------------------------------------------------------

/// Removes zero-length blocks from a profile (the usual convention: a block
/// of length 0 contributes nothing to a shuffle).
inline std::vector<int> positive_profile(const std::vector<int>& profile) {
    std::vector<int> out;
    for (int n : profile) {
        if (n < 0) throw std::invalid_argument("negative block length in shuffle profile");
        if (n > 0) out.push_back(n);
    }
    return out;
}

namespace detail {

// A shuffle in Sh(n1..nm) is determined by which output positions each block
// occupies: enumerating label sequences (l_1..l_n) with count(i) = n_i is the
// same as enumerating shuffles.  sigma maps the j-th index of block i to the
// j-th smallest position labelled i.
inline void label_sequences_rec(std::vector<int>& remaining, Word& seq, int n,
                                std::vector<Word>& out) {
    if (static_cast<int>(seq.size()) == n) {
        out.push_back(seq);
        return;
    }
    for (std::size_t i = 0; i < remaining.size(); ++i) {
        if (remaining[i] == 0) continue;
        --remaining[i];
        seq.push_back(static_cast<int>(i + 1));
        label_sequences_rec(remaining, seq, n, out);
        seq.pop_back();
        ++remaining[i];
    }
}

inline Permutation shuffle_from_labels(const Word& labels, const std::vector<int>& profile) {
    const int m = static_cast<int>(profile.size());
    std::vector<int> start(static_cast<std::size_t>(m), 0);  // first domain index of block i (0-based)
    for (int i = 1; i < m; ++i)
        start[static_cast<std::size_t>(i)] =
            start[static_cast<std::size_t>(i - 1)] + profile[static_cast<std::size_t>(i - 1)];
    std::vector<int> cursor(static_cast<std::size_t>(m), 0);
    Permutation sigma;
    sigma.image.assign(labels.size(), 0);
    for (std::size_t pos = 0; pos < labels.size(); ++pos) {
        const int block = labels[pos] - 1;
        const int domain_index = start[static_cast<std::size_t>(block)] +
                                 cursor[static_cast<std::size_t>(block)]++;
        sigma.image[static_cast<std::size_t>(domain_index)] = static_cast<int>(pos + 1);
    }
    return sigma;
}

}  // namespace detail

/// All sigma in Sh(n1..nm): permutations of {1..n} increasing on each block.
/// Zero-length blocks are dropped before enumeration.
inline std::vector<Permutation> shuffles(const std::vector<int>& profile,
                                         int cap = kDefaultLengthCap) {
    std::vector<int> prof = positive_profile(profile);
    const int n = std::accumulate(prof.begin(), prof.end(), 0);
    check_cap(n, cap, "shuffles");
    std::vector<Word> labels;
    Word seq;
    detail::label_sequences_rec(prof, seq, n, labels);
    std::vector<Permutation> out;
    out.reserve(labels.size());
    for (const Word& l : labels) out.push_back(detail::shuffle_from_labels(l, prof));
    return out;
}

/// All sigma in OSh(n1..nm): shuffles whose block-endpoint images increase,
/// sigma(n1) <= sigma(n1+n2) <= ... <= sigma(n).  In label terms: the last
/// occurrence of label i precedes the last occurrence of label i+1.
inline std::vector<Permutation> ordered_shuffles(const std::vector<int>& profile,
                                                 int cap = kDefaultLengthCap) {
    std::vector<int> prof = positive_profile(profile);
    const int n = std::accumulate(prof.begin(), prof.end(), 0);
    check_cap(n, cap, "ordered_shuffles");
    std::vector<Word> labels;
    Word seq;
    detail::label_sequences_rec(prof, seq, n, labels);
    std::vector<Permutation> out;
    for (const Word& l : labels) {
        bool ok = true;
        std::vector<int> last(prof.size() + 1, -1);
        for (std::size_t pos = 0; pos < l.size(); ++pos)
            last[static_cast<std::size_t>(l[pos])] = static_cast<int>(pos);
        for (std::size_t i = 1; i < prof.size(); ++i) {
            if (last[i] > last[i + 1]) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(detail::shuffle_from_labels(l, prof));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multiset constructions
// ---------------------------------------------------------------------------

/// Sh(w1,...,wm) = {{ sigma^{-1}_*(w1...wm) : sigma in Sh(|w1|..|wm|) }},
/// multiplicities counted per underlying permutation.  Empty factors are
/// dropped (zero blocks), so Sh() = {{ empty word }}.
inline Multiset shuffle_multiset(const WordTuple& parts, int cap = kDefaultLengthCap) {
    std::vector<int> profile;
    profile.reserve(parts.size());
    for (const Word& p : parts) profile.push_back(static_cast<int>(p.size()));
    const Word cat = concat(parts);
    Multiset out;
    for (const Permutation& sigma : shuffles(profile, cap))
        ++out[apply_perm(sigma.inverse(), cat)];
    return out;
}

inline Multiset shuffle_multiset(const Word& i, const Word& j, int cap = kDefaultLengthCap) {
    return shuffle_multiset(WordTuple{i, j}, cap);
}

/// OSh(k1,...,km) with the same conventions (all factors assumed nonempty by
/// callers that care; zero blocks are dropped here as well).
inline Multiset ordered_shuffle_multiset(const WordTuple& parts, int cap = kDefaultLengthCap) {
    std::vector<int> profile;
    profile.reserve(parts.size());
    for (const Word& p : parts) profile.push_back(static_cast<int>(p.size()));
    const Word cat = concat(parts);
    Multiset out;
    for (const Permutation& sigma : ordered_shuffles(profile, cap))
        ++out[apply_perm(sigma.inverse(), cat)];
    return out;
}

/// Sh^{-1}(k): all pairs (i,j) (empty factors allowed) with multiplicity
/// equal to the multiplicity of k in Sh(i,j).  Enumerated directly: for each
/// split size a and each sigma in Sh(a, |k|-a), the pair is sigma_* k cut at a.
inline PairMultiset unshuffle_pairs(const Word& k, int cap = kDefaultLengthCap) {
    const int n = static_cast<int>(k.size());
    check_cap(n, cap, "unshuffle_pairs");
    PairMultiset out;
    for (int a = 0; a <= n; ++a) {
        for (const Permutation& sigma : shuffles({a, n - a}, cap)) {
            const Word w = apply_perm(sigma, k);
            Word i(w.begin(), w.begin() + a);
            Word j(w.begin() + a, w.end());
            ++out[{std::move(i), std::move(j)}];
        }
    }
    return out;
}

namespace detail {

inline void compositions_rec(int n, int m, std::vector<int>& acc,
                             std::vector<std::vector<int>>& out) {
    if (m == 1) {
        if (n >= 1) {
            acc.push_back(n);
            out.push_back(acc);
            acc.pop_back();
        }
        return;
    }
    for (int first = 1; first + (m - 1) <= n; ++first) {
        acc.push_back(first);
        compositions_rec(n - first, m - 1, acc, out);
        acc.pop_back();
    }
}

}  // namespace detail

/// All compositions of n into m strictly positive parts.
inline std::vector<std::vector<int>> compositions(int n, int m) {
    std::vector<std::vector<int>> out;
    if (m < 1) return out;
    std::vector<int> acc;
    detail::compositions_rec(n, m, acc, out);
    return out;
}

/// OSh^{-1}(k, m): all m-tuples of *nonempty* words whose ordered shuffle
/// contains k, with multiplicity equal to the multiplicity of k in
/// OSh(tuple).
inline TupleMultiset ordered_unshuffle(const Word& k, int m, int cap = kDefaultLengthCap) {
    const int n = static_cast<int>(k.size());
    check_cap(n, cap, "ordered_unshuffle");
    TupleMultiset out;
    if (m < 1 || n < m) return out;
    for (const std::vector<int>& parts : compositions(n, m)) {
        for (const Permutation& sigma : ordered_shuffles(parts, cap)) {
            const Word w = apply_perm(sigma, k);
            WordTuple tuple;
            tuple.reserve(parts.size());
            std::size_t at = 0;
            for (int len : parts) {
                tuple.emplace_back(w.begin() + static_cast<std::ptrdiff_t>(at),
                                   w.begin() + static_cast<std::ptrdiff_t>(at + len));
                at += static_cast<std::size_t>(len);
            }
            ++out[tuple];
        }
    }
    return out;
}

/// Sh^{-1}(k, m): all m-tuples of *nonempty* words whose (plain) shuffle
/// contains k, with multiplicity equal to the multiplicity of k in Sh(tuple).
inline TupleMultiset unshuffle_tuples(const Word& k, int m, int cap = kDefaultLengthCap) {
    const int n = static_cast<int>(k.size());
    check_cap(n, cap, "unshuffle_tuples");
    TupleMultiset out;
    if (m < 1 || n < m) return out;
    for (const std::vector<int>& parts : compositions(n, m)) {
        for (const Permutation& sigma : shuffles(parts, cap)) {
            const Word w = apply_perm(sigma, k);
            WordTuple tuple;
            tuple.reserve(parts.size());
            std::size_t at = 0;
            for (int len : parts) {
                tuple.emplace_back(w.begin() + static_cast<std::ptrdiff_t>(at),
                                   w.begin() + static_cast<std::ptrdiff_t>(at + len));
                at += static_cast<std::size_t>(len);
            }
            ++out[tuple];
        }
    }
    return out;
}

namespace detail {

// All splittings of k into (prefix, suffix) with |suffix| >= 1.
inline std::vector<WordPair> splits_nonempty_tail(const Word& k) {
    std::vector<WordPair> out;
    for (std::size_t a = 0; a < k.size(); ++a)
        out.emplace_back(Word(k.begin(), k.begin() + static_cast<std::ptrdiff_t>(a)),
                         Word(k.begin() + static_cast<std::ptrdiff_t>(a), k.end()));
    return out;
}

}  // namespace detail

/// The right-hand multiset of the ordered-shuffle compatibility identity:
/// the union over l = 0..m of pairs (i, j) obtained by keeping k^1..k^l whole,
/// splitting each later k^h = i^h j^h with j^h nonempty, drawing
/// i from Sh( OSh(i^1..i^l), Sh(i^{l+1}..i^m) ) and j from OSh(j^{l+1}..j^m).
/// Multiplicities multiply along every choice.
inline PairMultiset ordered_compat_rhs(const WordTuple& ks, int cap = kDefaultLengthCap) {
    const int m = static_cast<int>(ks.size());
    int total = 0;
    for (const Word& k : ks) {
        if (k.empty()) throw std::invalid_argument("ordered_compat_rhs: empty input word");
        total += static_cast<int>(k.size());
    }
    check_cap(total, cap, "ordered_compat_rhs");

    PairMultiset out;
    for (int l = 0; l <= m; ++l) {
        // Per-h split choices for h = l+1..m.
        std::vector<std::vector<WordPair>> choices;
        for (int h = l; h < m; ++h)
            choices.push_back(detail::splits_nonempty_tail(ks[static_cast<std::size_t>(h)]));

        std::vector<std::size_t> idx(choices.size(), 0);
        while (true) {
            WordTuple i_head(ks.begin(), ks.begin() + l);  // i^h = k^h for h <= l
            WordTuple i_tail, j_tail;
            for (std::size_t c = 0; c < choices.size(); ++c) {
                i_tail.push_back(choices[c][idx[c]].first);
                j_tail.push_back(choices[c][idx[c]].second);
            }

            const Multiset a_set = ordered_shuffle_multiset(i_head, cap);
            const Multiset b_set = shuffle_multiset(i_tail, cap);
            const Multiset j_set = ordered_shuffle_multiset(j_tail, cap);

            for (const auto& [a, ca] : a_set) {
                for (const auto& [b, cb] : b_set) {
                    const Multiset i_set = shuffle_multiset(a, b, cap);
                    for (const auto& [iw, ci] : i_set)
                        for (const auto& [jw, cj] : j_set)
                            out[{iw, jw}] += ca * cb * ci * cj;
                }
            }

            // Advance the mixed-radix split index.
            std::size_t c = 0;
            for (; c < choices.size(); ++c) {
                if (++idx[c] < choices[c].size()) break;
                idx[c] = 0;
            }
            if (c == choices.size()) break;
        }
    }
    return out;
}

/// The left-hand multiset of the same identity: {{ (i,j) : ij in OSh(k^1..k^m) }},
/// i.e. every two-block deconcatenation of every ordered shuffle word.
inline PairMultiset ordered_compat_lhs(const WordTuple& ks, int cap = kDefaultLengthCap) {
    PairMultiset out;
    for (const auto& [w, c] : ordered_shuffle_multiset(ks, cap)) {
        for (std::size_t a = 0; a <= w.size(); ++a) {
            Word i(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(a));
            Word j(w.begin() + static_cast<std::ptrdiff_t>(a), w.end());
            out[{std::move(i), std::move(j)}] += c;
        }
    }
    return out;
}

/// Both sides of the graded interchange of shuffles and ordered shuffles:
/// LHS = Sh( OSh(k^1..k^{n1}), ..., OSh(.., k^n) ) built literally;
/// RHS = disjoint union over pi in Sh(n1..nm) of OSh(k^{pi^{-1}(1)}..k^{pi^{-1}(n)}).
/// Returned as two independently constructed multisets.
inline std::pair<Multiset, Multiset> graded_ordered_union(const std::vector<int>& profile,
                                                          const WordTuple& ks,
                                                          int cap = kDefaultLengthCap) {
    const int n = std::accumulate(profile.begin(), profile.end(), 0);
    if (n != static_cast<int>(ks.size()))
        throw std::invalid_argument("graded_ordered_union: profile/word-count mismatch");
    int total = 0;
    for (const Word& k : ks) {
        if (k.empty()) throw std::invalid_argument("graded_ordered_union: empty input word");
        total += static_cast<int>(k.size());
    }
    check_cap(total, cap, "graded_ordered_union");

    // LHS: ordered-shuffle each group, then shuffle the group results.
    std::vector<Multiset> groups;
    std::size_t at = 0;
    for (int len : profile) {
        WordTuple group(ks.begin() + static_cast<std::ptrdiff_t>(at),
                        ks.begin() + static_cast<std::ptrdiff_t>(at + len));
        at += static_cast<std::size_t>(len);
        groups.push_back(ordered_shuffle_multiset(group, cap));
    }
    Multiset lhs;
    std::vector<Multiset::const_iterator> its;
    for (const Multiset& g : groups) its.push_back(g.begin());
    if (!groups.empty()) {
        while (true) {
            WordTuple sample;
            std::int64_t mult = 1;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                sample.push_back(its[g]->first);
                mult *= its[g]->second;
            }
            for (const auto& [w, c] : shuffle_multiset(sample, cap)) lhs[w] += mult * c;
            std::size_t g = 0;
            for (; g < groups.size(); ++g) {
                if (++its[g] != groups[static_cast<std::size_t>(g)].end()) break;
                its[g] = groups[static_cast<std::size_t>(g)].begin();
            }
            if (g == groups.size()) break;
        }
    }

    // RHS: reorder the words by every block shuffle of the profile.
    Multiset rhs;
    for (const Permutation& pi : shuffles(profile, cap)) {
        const Permutation inv = pi.inverse();
        WordTuple reordered;
        reordered.reserve(ks.size());
        for (int q = 1; q <= n; ++q)
            reordered.push_back(ks[static_cast<std::size_t>(inv(q) - 1)]);
        for (const auto& [w, c] : ordered_shuffle_multiset(reordered, cap)) rhs[w] += c;
    }
    return {lhs, rhs};
}

}  // namespace rough::words
