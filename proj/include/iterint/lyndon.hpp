#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace iterint {

/// A word of length three over the alphabet {1..q}, stored 1-based.
struct Word3 {
    int j = 1, k = 1, l = 1;
    friend bool operator==(const Word3&, const Word3&) = default;
    friend auto operator<=>(const Word3&, const Word3&) = default;
};

inline void check_letter(int c, int q) {
    if (c < 1 || c > q) throw std::domain_error("letter out of range");
}

/// Lyndon test for length-3 words: j < min(k,l), or j == k < l.
inline bool is_lyndon3(const Word3& w, int q) {
    check_letter(w.j, q);
    check_letter(w.k, q);
    check_letter(w.l, q);
    return (w.j < w.k && w.j < w.l) || (w.j == w.k && w.k < w.l);
}

/// All Lyndon words of length 3 in lexicographic order.
inline std::vector<Word3> enumerate_lyndon3(int q) {
    if (q < 1) throw std::domain_error("q must be positive");
    std::vector<Word3> out;
    out.reserve(static_cast<std::size_t>((q * q * q - q) / 3));
    for (int j = 1; j <= q; ++j)
        for (int k = 1; k <= q; ++k)
            for (int l = 1; l <= q; ++l)
                if (is_lyndon3({j, k, l}, q)) out.push_back({j, k, l});
    return out;
}

/// Block offsets of the flattened coefficient vector.
///
/// Order: z, u, lambda (j<k), mu1 (j<=k), mu2 (j<=k), nu (j<k), delta (Lyndon).
/// Triangles are stored row by row with 0-based letters.
struct IndexLayout {
    int q = 0;
    int d = 0;
    int z = 0, u = 0, lambda = 0, mu1 = 0, mu2 = 0, nu = 0, delta = 0;
    std::vector<Word3> words;

    static int strict(int q) { return q * (q - 1) / 2; }
    static int upper(int q) { return q * (q + 1) / 2; }

    /// position of (j,k), j<k, inside a strict upper triangle (0-based letters)
    int strict_index(int j, int k) const { return j * q - j * (j + 1) / 2 + (k - j - 1); }
    /// position of (j,k), j<=k, inside an upper triangle incl. diagonal
    int upper_index(int j, int k) const { return j * q - j * (j - 1) / 2 + (k - j); }

    /// Position of a Lyndon word in the delta block, or -1.
    int word_index(int j, int k, int l) const {
        for (std::size_t i = 0; i < words.size(); ++i)
            if (words[i].j == j + 1 && words[i].k == k + 1 && words[i].l == l + 1)
                return static_cast<int>(i);
        return -1;
    }
};

inline IndexLayout layout(int q) {
    if (q < 1) throw std::domain_error("q must be positive");
    IndexLayout L;
    L.q = q;
    L.words = enumerate_lyndon3(q);
    int off = 0;
    L.z = off;      off += q;
    L.u = off;      off += q;
    L.lambda = off; off += IndexLayout::strict(q);
    L.mu1 = off;    off += IndexLayout::upper(q);
    L.mu2 = off;    off += IndexLayout::upper(q);
    L.nu = off;     off += IndexLayout::strict(q);
    L.delta = off;  off += static_cast<int>(L.words.size());
    L.d = off;
    return L;
}

inline int expected_dimension(int q) { return 2 * q * q + 2 * q + (q * q * q - q) / 3; }

}  // namespace iterint
