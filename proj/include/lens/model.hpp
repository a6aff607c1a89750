// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// Toy decoder-only multimodal transformer: pre-norm blocks, RMS norm,
// multi-head causal attention without positional embeddings, and a forward
// pass that can substitute the reductions from reductions.hpp on a
// per-layer basis.

#ifndef LENS_MODEL_HPP
#define LENS_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lens/layout.hpp"
#include "lens/matrix.hpp"
#include "lens/plan.hpp"
#include "lens/reductions.hpp"
#include "lens/rng.hpp"

namespace lens {

struct ModelConfig {
    std::size_t n_layers = 8;
    std::size_t d_model = 64;
    std::size_t d_ff = 256;
    std::size_t n_heads = 4;
    FfnKind ffn_kind = FfnKind::vanilla;
    std::size_t vocab_size = 512;
    Activation act = Activation::relu;

    std::size_t head_dim() const { return d_model / n_heads; }

    std::size_t tensors_per_layer() const {
        // attn norm gain, wq, wk, wv, wo, ffn norm gain, plus the FFN weights
        return 6 + (ffn_kind == FfnKind::vanilla ? 4 : 3);
    }
    std::size_t tensor_count() const { return 2 + n_layers * tensors_per_layer() + 2; }

    void validate() const {
        if (n_layers < 1) fail("config: n_layers must be >= 1");
        if (d_model < 1) fail("config: d_model must be >= 1");
        if (d_ff < 1) fail("config: d_ff must be >= 1");
        if (n_heads < 1) fail("config: n_heads must be >= 1");
        if (d_model % n_heads != 0)
            fail("config: d_model (" + std::to_string(d_model) +
                 ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
        if (vocab_size < 1) fail("config: vocab_size must be >= 1");
    }

    bool operator==(const ModelConfig&) const = default;
};

struct LayerWeights {
    Vec attn_norm_gain;
    Matrix wq, wk, wv, wo;
    Vec ffn_norm_gain;
    Matrix w1, w2;  // vanilla
    Vec b1, b2;
    Matrix wg, wu, wd;  // gated

    FfnRef ffn_ref(const ModelConfig& cfg) const {
        return cfg.ffn_kind == FfnKind::vanilla
                   ? FfnRef::vanilla(w1, b1, w2, b2, cfg.act)
                   : FfnRef::gated(wg, wu, wd, cfg.act);
    }
};

/// Weights of the toy model. Text and visual positions index separate
/// embedding tables; visual embeddings stand in for projected image
/// features.
struct Checkpoint {
    ModelConfig config;
    Matrix tok_embeddings;  // vocab x d_model
    Matrix vis_embeddings;  // vocab x d_model
    std::vector<LayerWeights> layers;
    Vec final_norm_gain;
    Matrix output;  // d_model x vocab

    /// Shapes every tensor per the config, leaving values zero.
    static Checkpoint allocate(const ModelConfig& cfg) {
        cfg.validate();
        Checkpoint c;
        c.config = cfg;
        c.tok_embeddings = Matrix(cfg.vocab_size, cfg.d_model);
        c.vis_embeddings = Matrix(cfg.vocab_size, cfg.d_model);
        c.layers.resize(cfg.n_layers);
        for (LayerWeights& lw : c.layers) {
            lw.attn_norm_gain.assign(cfg.d_model, 0.0);
            lw.wq = Matrix(cfg.d_model, cfg.d_model);
            lw.wk = Matrix(cfg.d_model, cfg.d_model);
            lw.wv = Matrix(cfg.d_model, cfg.d_model);
            lw.wo = Matrix(cfg.d_model, cfg.d_model);
            lw.ffn_norm_gain.assign(cfg.d_model, 0.0);
            if (cfg.ffn_kind == FfnKind::vanilla) {
                lw.w1 = Matrix(cfg.d_model, cfg.d_ff);
                lw.b1.assign(cfg.d_ff, 0.0);
                lw.w2 = Matrix(cfg.d_ff, cfg.d_model);
                lw.b2.assign(cfg.d_model, 0.0);
            } else {
                lw.wg = Matrix(cfg.d_model, cfg.d_ff);
                lw.wu = Matrix(cfg.d_model, cfg.d_ff);
                lw.wd = Matrix(cfg.d_ff, cfg.d_model);
            }
        }
        c.final_norm_gain.assign(cfg.d_model, 0.0);
        c.output = Matrix(cfg.d_model, cfg.vocab_size);
        return c;
    }
};

enum class InitRule { normal, ones, zeros };

/// One entry of the canonical tensor enumeration; the order defines the
/// manifest and blob layout.
struct TensorRef {
    std::string name;
    std::vector<std::size_t> shape;
    double* data;
    std::size_t count;
    InitRule init;
};

inline std::vector<TensorRef> tensor_entries(Checkpoint& c) {
    std::vector<TensorRef> out;
    out.reserve(c.config.tensor_count());
    auto mat = [&](const std::string& name, Matrix& m, InitRule r) {
        out.push_back({name, {m.rows, m.cols}, m.data.data(), m.data.size(), r});
    };
    auto vec = [&](const std::string& name, Vec& v, InitRule r) {
        out.push_back({name, {v.size()}, v.data(), v.size(), r});
    };
    mat("tok_embeddings", c.tok_embeddings, InitRule::normal);
    mat("vis_embeddings", c.vis_embeddings, InitRule::normal);
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        LayerWeights& lw = c.layers[i];
        vec(p + "attn_norm.gain", lw.attn_norm_gain, InitRule::ones);
        mat(p + "wq", lw.wq, InitRule::normal);
        mat(p + "wk", lw.wk, InitRule::normal);
        mat(p + "wv", lw.wv, InitRule::normal);
        mat(p + "wo", lw.wo, InitRule::normal);
        vec(p + "ffn_norm.gain", lw.ffn_norm_gain, InitRule::ones);
        if (c.config.ffn_kind == FfnKind::vanilla) {
            mat(p + "ffn.w1", lw.w1, InitRule::normal);
            vec(p + "ffn.b1", lw.b1, InitRule::zeros);
            mat(p + "ffn.w2", lw.w2, InitRule::normal);
            vec(p + "ffn.b2", lw.b2, InitRule::zeros);
        } else {
            mat(p + "ffn.wg", lw.wg, InitRule::normal);
            mat(p + "ffn.wu", lw.wu, InitRule::normal);
            mat(p + "ffn.wd", lw.wd, InitRule::normal);
        }
    }
    vec("final_norm.gain", c.final_norm_gain, InitRule::ones);
    mat("output", c.output, InitRule::normal);
    return out;
}

/// Read-only view of the canonical enumeration. Callers must not write
/// through the returned pointers.
inline std::vector<TensorRef> tensor_entries(const Checkpoint& c) {
    return tensor_entries(const_cast<Checkpoint&>(c));
}

constexpr double kInitStddev = 0.02;

/// Weights i.i.d. normal(0, 0.02), norm gains one, biases zero. Values are
/// rounded through f32 immediately so the in-memory checkpoint equals its
/// serialized form exactly. Identical (config, seed) gives identical bytes.
inline Checkpoint random_init(const ModelConfig& cfg, std::uint64_t seed) {
    Checkpoint c = Checkpoint::allocate(cfg);
    Rng rng(splitmix64(seed));
    for (TensorRef& t : tensor_entries(c)) {
        switch (t.init) {
            case InitRule::normal:
                for (std::size_t i = 0; i < t.count; ++i)
                    t.data[i] = static_cast<double>(
                        static_cast<float>(rng.normal(0.0, kInitStddev)));
                break;
            case InitRule::ones:
                for (std::size_t i = 0; i < t.count; ++i) t.data[i] = 1.0;
                break;
            case InitRule::zeros:
                for (std::size_t i = 0; i < t.count; ++i) t.data[i] = 0.0;
                break;
        }
    }
    return c;
}

inline AttentionMask causal_mask(std::size_t n) {
    if (n < 1) fail("causal_mask: n must be >= 1");
    AttentionMask m(n);
    for (std::size_t q = 0; q < n; ++q)
        for (std::size_t k = 0; k <= q; ++k) m.set(q, k, true);
    return m;
}

struct ForwardOptions {
    bool record_attention = false;
};

struct ForwardResult {
    Matrix logits;                       // one row per surviving position
    std::vector<std::size_t> positions;  // original position of each row
    // Per layer: average attention received by each live position at that
    // layer. Filled for every layer when record_attention is set, and for
    // the pruning layer when the plan prunes.
    std::vector<Vec> attention_received;
};

namespace detail {

/// Multi-head attention for one layer. Returns the projected output and,
/// optionally, the average attention received per key position.
inline Matrix attention_block(const Matrix& x, const LayerWeights& lw,
                              const ModelConfig& cfg, const AttentionMask& mask,
                              Vec* received) {
    const std::size_t n = x.rows;
    const std::size_t dh = cfg.head_dim();
    const Matrix q = matmul(x, lw.wq);
    const Matrix k = matmul(x, lw.wk);
    const Matrix v = matmul(x, lw.wv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    if (received) received->assign(n, 0.0);
    Matrix concat(n, cfg.d_model);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const std::size_t off = h * dh;
        Matrix scores(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* qi = q.row(i) + off;
            for (std::size_t j = 0; j < n; ++j) {
                const double* kj = k.row(j) + off;
                double dot = 0.0;
                for (std::size_t d = 0; d < dh; ++d) dot += qi[d] * kj[d];
                scores(i, j) = dot * scale;
            }
        }
        const Matrix probs = masked_softmax_rows(scores, mask);
        if (received)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) (*received)[j] += probs(i, j);
        for (std::size_t i = 0; i < n; ++i) {
            double* orow = concat.row(i) + off;
            for (std::size_t j = 0; j < n; ++j) {
                const double p = probs(i, j);
                if (p == 0.0) continue;
                const double* vj = v.row(j) + off;
                for (std::size_t d = 0; d < dh; ++d) orow[d] += p * vj[d];
            }
        }
    }
    if (received) {
        const double denom = static_cast<double>(cfg.n_heads) * static_cast<double>(n);
        for (double& r : *received) r /= denom;
    }
    return matmul(concat, lw.wo);
}

/// FFN block with the dynamic reduction applied to the scope rows when the
/// layer is reduced. Non-scope rows always take the unreduced path.
inline Matrix ffn_block(const Matrix& x, const LayerWeights& lw,
                        const ModelConfig& cfg, const TokenLayout& layout,
                        const ReductionPlan* plan, bool reduced,
                        std::uint64_t seed, std::size_t layer) {
    const FfnRef ffn = lw.ffn_ref(cfg);
    if (!reduced) return full_ffn_forward(x, ffn);

    const std::vector<std::size_t> rows = scope_rows(layout, plan->scope);
    if (rows.empty()) return full_ffn_forward(x, ffn);

    const std::size_t k_count = plan->k_count(cfg.d_ff);
    const Matrix x_scope = slice_rows(x, rows);
    Selection sel;
    if (k_count == cfg.d_ff) {
        // Full selection is forced regardless of the probe; skip it.
        sel = Selection::full(cfg.d_ff);
    } else {
        Rng rng = Rng::substream(seed, layer);
        sel = probe_select(x_scope, ffn, plan->probe_count(rows.size()), k_count, rng);
    }
    Matrix y_scope = dynamic_ffn_forward(x_scope, ffn, sel);
    if (rows.size() == x.rows) return y_scope;

    Matrix out(x.rows, cfg.d_model);
    std::vector<std::size_t> rest;
    rest.reserve(x.rows - rows.size());
    {
        std::size_t ri = 0;
        for (std::size_t p = 0; p < x.rows; ++p) {
            if (ri < rows.size() && rows[ri] == p) ++ri;
            else rest.push_back(p);
        }
    }
    const Matrix y_rest = full_ffn_forward(slice_rows(x, rest), ffn);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(y_scope.row(i), y_scope.row(i) + cfg.d_model, out.row(rows[i]));
    for (std::size_t i = 0; i < rest.size(); ++i)
        std::copy(y_rest.row(i), y_rest.row(i) + cfg.d_model, out.row(rest[i]));
    return out;
}

}  // namespace detail

/// Single-pass forward. With plan == nullptr (or a plan whose layer sets are
/// empty) this is the plain pre-norm causal decoder; listed layers swap in
/// the hollow mask and/or the probe-activated dynamic FFN. The seed drives
/// probe sampling only.
inline ForwardResult forward(const Checkpoint& ckpt,
                             const std::vector<std::uint32_t>& token_ids,
                             const TokenLayout& layout, const ReductionPlan* plan,
                             std::uint64_t seed, const ForwardOptions& opts = {}) {
    const ModelConfig& cfg = ckpt.config;
    if (token_ids.size() != layout.size())
        fail("forward: token_ids length " + std::to_string(token_ids.size()) +
             " does not match layout length " + std::to_string(layout.size()));
    if (layout.size() == 0) fail("forward: empty sequence");
    for (std::uint32_t id : token_ids)
        if (id >= cfg.vocab_size)
            fail("forward: token id " + std::to_string(id) +
                 " out of range for vocab " + std::to_string(cfg.vocab_size));
    if (plan) plan->validate_for_layers(cfg.n_layers);

    const std::size_t n0 = layout.size();
    Matrix h(n0, cfg.d_model);
    for (std::size_t p = 0; p < n0; ++p) {
        const Matrix& table = layout.is_visual(p) ? ckpt.vis_embeddings : ckpt.tok_embeddings;
        std::copy(table.row(token_ids[p]), table.row(token_ids[p]) + cfg.d_model, h.row(p));
    }

    TokenLayout live = layout;
    std::vector<std::size_t> positions(n0);
    std::iota(positions.begin(), positions.end(), std::size_t{0});

    ForwardResult res;
    res.attention_received.resize(cfg.n_layers);

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& lw = ckpt.layers[l];
        const bool attn_reduced = plan && plan->attn_layers.count(l) > 0;
        const bool ffn_reduced = plan && plan->ffn_layers.count(l) > 0;
        const bool prune_here = plan && plan->pruning && plan->pruning->at_layer == l;
        const AttentionMask mask = attn_reduced
                                       ? hollow_mask_scoped(live, plan->R_A, plan->scope)
                                       : causal_mask(live.size());

        Vec received;
        Vec* received_ptr = (opts.record_attention || prune_here) ? &received : nullptr;
        const Matrix a_in = rms_norm(h, lw.attn_norm_gain);
        const Matrix attn_out = detail::attention_block(a_in, lw, cfg, mask, received_ptr);
        for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += attn_out.data[i];

        const Matrix f_in = rms_norm(h, lw.ffn_norm_gain);
        const Matrix ffn_out =
            detail::ffn_block(f_in, lw, cfg, live, plan, ffn_reduced, seed, l);
        for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += ffn_out.data[i];

        if (received_ptr) res.attention_received[l] = received;

        if (prune_here) {
            const std::vector<std::size_t> kept =
                fastv_prune(received, live, plan->pruning->keep_ratio);
            Matrix nh(kept.size(), cfg.d_model);
            std::vector<Token> ntags(kept.size());
            std::vector<std::size_t> npos(kept.size());
            for (std::size_t i = 0; i < kept.size(); ++i) {
                std::copy(h.row(kept[i]), h.row(kept[i]) + cfg.d_model, nh.row(i));
                ntags[i] = live.tags[kept[i]];
                npos[i] = positions[kept[i]];
            }
            h = std::move(nh);
            live = TokenLayout(std::move(ntags));
            positions = std::move(npos);
        }
    }

    res.logits = matmul(rms_norm(h, ckpt.final_norm_gain), ckpt.output);
    res.positions = std::move(positions);
    return res;
}

}  // namespace lens

#endif  // LENS_MODEL_HPP
