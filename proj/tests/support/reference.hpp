// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. These are
// deliberately written from the definitions, not by calling the library
// code they check.

#ifndef LENS_TESTS_REFERENCE_HPP
#define LENS_TESTS_REFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <set>
#include <vector>

#include "lens/layout.hpp"
#include "lens/matrix.hpp"

namespace lens_test {

/// Plain causal softmax, no mask machinery: row q normalizes over k <= q.
inline lens::Matrix reference_causal_softmax(const lens::Matrix& scores) {
    const std::size_t n = scores.rows;
    lens::Matrix out(n, n);
    for (std::size_t q = 0; q < n; ++q) {
        double mx = scores(q, 0);
        for (std::size_t k = 1; k <= q; ++k) mx = std::max(mx, scores(q, k));
        double denom = 0.0;
        for (std::size_t k = 0; k <= q; ++k) denom += std::exp(scores(q, k) - mx);
        for (std::size_t k = 0; k <= q; ++k)
            out(q, k) = std::exp(scores(q, k) - mx) / denom;
    }
    return out;
}

/// Vanilla FFN with the hidden columns outside `sel` zeroed after the
/// activation: Y = H_zeroed * W2 + b2.
inline lens::Matrix reference_zeroed_vanilla_ffn(
    const lens::Matrix& x, const lens::Matrix& w1, const lens::Vec& b1,
    const lens::Matrix& w2, const lens::Vec& b2, lens::Activation act,
    const std::vector<std::size_t>& sel) {
    const std::size_t n = x.rows, dff = w1.cols, d = w2.cols;
    lens::Matrix h(n, dff);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dff; ++j) {
            double v = b1[j];
            for (std::size_t c = 0; c < x.cols; ++c) v += x(i, c) * w1(c, j);
            h(i, j) = lens::apply_activation(v, act);
        }
    std::vector<bool> keep(dff, false);
    for (std::size_t j : sel) keep[j] = true;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dff; ++j)
            if (!keep[j]) h(i, j) = 0.0;
    lens::Matrix y(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double v = b2[j];
            for (std::size_t c = 0; c < dff; ++c) v += h(i, c) * w2(c, j);
            y(i, j) = v;
        }
    return y;
}

/// Gated FFN with hidden columns outside `sel` zeroed before the down
/// projection.
inline lens::Matrix reference_zeroed_gated_ffn(
    const lens::Matrix& x, const lens::Matrix& wg, const lens::Matrix& wu,
    const lens::Matrix& wd, lens::Activation act,
    const std::vector<std::size_t>& sel) {
    const std::size_t n = x.rows, dff = wg.cols, d = wd.cols;
    lens::Matrix h(n, dff);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dff; ++j) {
            double g = 0.0, u = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                g += x(i, c) * wg(c, j);
                u += x(i, c) * wu(c, j);
            }
            h(i, j) = lens::apply_activation(g, act) * u;
        }
    std::vector<bool> keep(dff, false);
    for (std::size_t j : sel) keep[j] = true;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dff; ++j)
            if (!keep[j]) h(i, j) = 0.0;
    lens::Matrix y(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (std::size_t c = 0; c < dff; ++c) v += h(i, c) * wd(c, j);
            y(i, j) = v;
        }
    return y;
}

/// Direct transcription of the hollow attention rule.
inline bool reference_hollow_allowed(const lens::TokenLayout& layout,
                                     std::size_t r_a, std::size_t q, std::size_t k) {
    if (k > q) return false;
    if (!layout.is_visual(q)) return true;   // text queries keep full causal rows
    if (!layout.is_visual(k)) return true;   // earlier text is always visible
    std::size_t jq = 0, jk = 0, j = 0;
    for (std::size_t p = 0; p < layout.size(); ++p) {
        if (!layout.is_visual(p)) continue;
        if (p == q) jq = j;
        if (p == k) jk = j;
        ++j;
    }
    return jq - jk <= r_a;
}

/// Closed-form allowed-pair count for a hollow mask:
/// text row q contributes q+1; a visual row at position q with visual
/// ordinal j contributes (#text positions <= q) + min(j, R_A) + 1.
inline std::size_t reference_hollow_pair_count(const lens::TokenLayout& layout,
                                               std::size_t r_a) {
    std::size_t total = 0, text_seen = 0, j = 0;
    for (std::size_t q = 0; q < layout.size(); ++q) {
        if (!layout.is_visual(q)) {
            ++text_seen;
            total += q + 1;
        } else {
            total += text_seen + std::min(j, r_a) + 1;
            ++j;
        }
    }
    return total;
}

/// Brute-force greedy ranking over an arbitrary set-scoring function,
/// following the search loop definition directly. Records every evaluated
/// (set, score) pair.
struct ReferenceGreedyResult {
    std::vector<std::size_t> ranked;
    std::vector<std::pair<std::set<std::size_t>, double>> evals;
};

inline ReferenceGreedyResult reference_greedy(
    const std::vector<std::size_t>& search_space,
    const std::set<std::size_t>& pre_applied,
    const std::function<double(const std::set<std::size_t>&)>& score) {
    ReferenceGreedyResult res;
    std::set<std::size_t> applied = pre_applied;
    std::vector<std::size_t> unranked = search_space;
    std::sort(unranked.begin(), unranked.end());
    while (!unranked.empty()) {
        double best_score = 0.0;
        std::size_t best_index = unranked.size();
        for (std::size_t i = 0; i < unranked.size(); ++i) {
            std::set<std::size_t> cand = applied;
            cand.insert(unranked[i]);
            const double s = score(cand);
            res.evals.emplace_back(cand, s);
            if (best_index == unranked.size() || s > best_score) {
                best_score = s;
                best_index = i;
            }
        }
        res.ranked.push_back(unranked[best_index]);
        applied.insert(unranked[best_index]);
        unranked.erase(unranked.begin() + static_cast<std::ptrdiff_t>(best_index));
    }
    return res;
}

}  // namespace lens_test

#endif  // LENS_TESTS_REFERENCE_HPP
