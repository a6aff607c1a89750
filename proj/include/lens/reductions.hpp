// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// The two per-token computational reductions and the token-pruning step:
//
//   * probe_select / dynamic_ffn_forward: pick K of d_ff hidden units from
//     the mean absolute activation of M sampled rows, then run the FFN on
//     the sliced weight matrices only.
//   * hollow_mask: visual queries keep a local window of preceding visual
//     tokens plus all earlier text tokens; text queries keep full causal
//     attention.
//   * fastv_prune: drop the visual positions that receive the least
//     attention at a chosen layer.

#ifndef LENS_REDUCTIONS_HPP
#define LENS_REDUCTIONS_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "lens/layout.hpp"
#include "lens/matrix.hpp"
#include "lens/plan.hpp"
#include "lens/rng.hpp"

namespace lens {

enum class FfnKind { vanilla, gated };

inline FfnKind parse_ffn_kind(const std::string& s) {
    if (s == "vanilla") return FfnKind::vanilla;
    if (s == "gated") return FfnKind::gated;
    fail("unknown ffn_kind '" + s + "' (expected vanilla or gated)");
}

inline std::string to_string(FfnKind k) {
    return k == FfnKind::vanilla ? "vanilla" : "gated";
}

/// Non-owning view of one layer's FFN weights. Vanilla uses w1/b1/w2/b2,
/// gated uses wg/wu/wd; the unused pointers stay null.
struct FfnRef {
    FfnKind kind = FfnKind::vanilla;
    Activation act = Activation::relu;
    const Matrix* w1 = nullptr;
    const Vec* b1 = nullptr;
    const Matrix* w2 = nullptr;
    const Vec* b2 = nullptr;
    const Matrix* wg = nullptr;
    const Matrix* wu = nullptr;
    const Matrix* wd = nullptr;

    static FfnRef vanilla(const Matrix& w1, const Vec& b1, const Matrix& w2,
                          const Vec& b2, Activation act) {
        FfnRef f;
        f.kind = FfnKind::vanilla;
        f.act = act;
        f.w1 = &w1; f.b1 = &b1; f.w2 = &w2; f.b2 = &b2;
        return f;
    }

    static FfnRef gated(const Matrix& wg, const Matrix& wu, const Matrix& wd,
                        Activation act) {
        FfnRef f;
        f.kind = FfnKind::gated;
        f.act = act;
        f.wg = &wg; f.wu = &wu; f.wd = &wd;
        return f;
    }

    std::size_t d_ff() const {
        return kind == FfnKind::vanilla ? w1->cols : wg->cols;
    }
};

namespace detail {

inline Matrix slice_cols(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(m.rows, idx.size());
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* src = m.row(i);
        double* dst = out.row(i);
        for (std::size_t j = 0; j < idx.size(); ++j) dst[j] = src[idx[j]];
    }
    return out;
}

inline Matrix slice_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(m.row(idx[i]), m.row(idx[i]) + m.cols, out.row(i));
    return out;
}

inline Vec slice_vec(const Vec& v, const std::vector<std::size_t>& idx) {
    Vec out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
    return out;
}

inline void add_row_bias(Matrix& m, const Vec& b) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += b[j];
    }
}

/// Hidden representation on the sliced unit set. Passing the full index set
/// reproduces the unsliced hidden matrix bitwise.
inline Matrix hidden_on(const Matrix& x, const FfnRef& ffn,
                        const std::vector<std::size_t>& idx) {
    if (ffn.kind == FfnKind::vanilla) {
        Matrix h = matmul(x, slice_cols(*ffn.w1, idx));
        add_row_bias(h, slice_vec(*ffn.b1, idx));
        return activation(h, ffn.act);
    }
    Matrix g = activation(matmul(x, slice_cols(*ffn.wg, idx)), ffn.act);
    const Matrix u = matmul(x, slice_cols(*ffn.wu, idx));
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= u.data[i];
    return g;
}

}  // namespace detail

/// Selects the K hidden units whose mean absolute activation over M sampled
/// rows of X is largest. Ties break toward the lower index; the result is
/// sorted ascending. Sampled rows are visited in ascending order, so
/// M == X.rows gives an rng-independent statistic.
inline Selection probe_select(const Matrix& x, const FfnRef& ffn, std::size_t m,
                              std::size_t k, Rng& rng) {
    const std::size_t n = x.rows;
    const std::size_t d_ff = ffn.d_ff();
    if (m < 1 || m > n)
        fail("probe_select: M=" + std::to_string(m) + " out of range [1, " +
             std::to_string(n) + "]");
    if (k < 1 || k > d_ff)
        fail("probe_select: K=" + std::to_string(k) + " out of range [1, " +
             std::to_string(d_ff) + "]");

    const std::vector<std::size_t> sample = rng.sample_without_replacement(n, m);
    const Matrix h = detail::hidden_on(detail::slice_rows(x, sample), ffn,
                                       Selection::full(d_ff).indices);

    Vec mean_abs(d_ff, 0.0);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const double* r = h.row(i);
        for (std::size_t j = 0; j < d_ff; ++j) mean_abs[j] += std::abs(r[j]);
    }
    for (double& v : mean_abs) v /= static_cast<double>(m);

    std::vector<std::size_t> order(d_ff);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mean_abs[a] != mean_abs[b]) return mean_abs[a] > mean_abs[b];
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());

    Selection s;
    s.indices = std::move(order);
    return s;
}

/// FFN forward on the activated unit subset only. With the full selection
/// this is bitwise-identical to the unreduced FFN (same slices, same
/// summation order).
inline Matrix dynamic_ffn_forward(const Matrix& x, const FfnRef& ffn,
                                  const Selection& s) {
    s.validate(ffn.d_ff());
    const Matrix h = detail::hidden_on(x, ffn, s.indices);
    if (ffn.kind == FfnKind::vanilla) {
        Matrix y = matmul(h, detail::slice_rows(*ffn.w2, s.indices));
        detail::add_row_bias(y, *ffn.b2);
        return y;
    }
    return matmul(h, detail::slice_rows(*ffn.wd, s.indices));
}

/// Unreduced FFN.
inline Matrix full_ffn_forward(const Matrix& x, const FfnRef& ffn) {
    return dynamic_ffn_forward(x, ffn, Selection::full(ffn.d_ff()));
}

/// Causal mask restricted for visual queries: a visual query at visual
/// ordinal j may attend to every earlier text position and to visual
/// ordinals in [j - R_A, j]. Text query rows are full causal.
inline AttentionMask hollow_mask(const TokenLayout& layout, std::size_t r_a) {
    if (r_a < 1) fail("hollow_mask: R_A must be >= 1");
    const std::size_t n = layout.size();
    const std::vector<std::size_t> ord = layout.visual_ordinals();
    AttentionMask mask(n);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t k = 0; k <= q; ++k) {
            bool ok = true;
            if (layout.is_visual(q) && layout.is_visual(k))
                ok = ord[q] - ord[k] <= r_a;
            mask.set(q, k, ok);
        }
    }
    return mask;
}

/// Scope-aware mask used by the forward pass. visual_only is exactly
/// hollow_mask; all_tokens additionally windows text-to-text attention the
/// same way (ordinal within the text subsequence), keeping cross-modal
/// attention intact.
inline AttentionMask hollow_mask_scoped(const TokenLayout& layout, std::size_t r_a,
                                        Scope scope) {
    if (scope == Scope::visual_only) return hollow_mask(layout, r_a);
    if (r_a < 1) fail("hollow_mask: R_A must be >= 1");
    const std::size_t n = layout.size();
    const std::vector<std::size_t> vord = layout.visual_ordinals();
    std::vector<std::size_t> tord(n, static_cast<std::size_t>(-1));
    std::size_t i = 0;
    for (std::size_t p = 0; p < n; ++p)
        if (!layout.is_visual(p)) tord[p] = i++;
    AttentionMask mask(n);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t k = 0; k <= q; ++k) {
            bool ok = true;
            if (layout.is_visual(q) && layout.is_visual(k))
                ok = vord[q] - vord[k] <= r_a;
            else if (!layout.is_visual(q) && !layout.is_visual(k))
                ok = tord[q] - tord[k] <= r_a;
            mask.set(q, k, ok);
        }
    }
    return mask;
}

/// Keeps every text position plus the ceil(keep_ratio * n_visual) visual
/// positions with the highest attention received (ties toward the lower
/// position). Returns the kept positions in ascending order.
inline std::vector<std::size_t> fastv_prune(const Vec& attention_received,
                                            const TokenLayout& layout,
                                            double keep_ratio) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0))
        fail("fastv_prune: keep_ratio must be in (0, 1]");
    if (attention_received.size() != layout.size())
        fail("fastv_prune: attention vector length does not match layout");

    const std::vector<std::size_t> visual = layout.visual_positions();
    const auto keep_count = static_cast<std::size_t>(
        std::ceil(keep_ratio * static_cast<double>(visual.size())));

    std::vector<std::size_t> ranked = visual;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        if (attention_received[a] != attention_received[b])
            return attention_received[a] > attention_received[b];
        return a < b;
    });
    ranked.resize(keep_count);

    std::vector<std::size_t> kept = layout.text_positions();
    kept.insert(kept.end(), ranked.begin(), ranked.end());
    std::sort(kept.begin(), kept.end());
    return kept;
}

/// Rows of a sequence that the reductions apply to under the given scope.
inline std::vector<std::size_t> scope_rows(const TokenLayout& layout, Scope scope) {
    if (scope == Scope::visual_only) return layout.visual_positions();
    std::vector<std::size_t> all(layout.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

}  // namespace lens

#endif  // LENS_REDUCTIONS_HPP
