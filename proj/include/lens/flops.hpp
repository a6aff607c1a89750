// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic floating-point-operation accounting. Conventions: 2 FLOPs per
// multiply-accumulate; biases, normalizations and elementwise products are
// ignored (sub-0.1% of totals). Attention cores are counted from the exact
// number of allowed query-key pairs of each layer's mask.

#ifndef LENS_FLOPS_HPP
#define LENS_FLOPS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lens/model.hpp"

namespace lens {

struct LayerFlops {
    double attn_proj = 0.0;      // Q, K, V, O projections
    double attn_core = 0.0;      // score and value mixing over allowed pairs
    double ffn = 0.0;            // position-wise FFN (full + reduced rows)
    double probe_overhead = 0.0; // hidden rows computed for the probe sample

    double total() const { return attn_proj + attn_core + ffn + probe_overhead; }
};

struct FlopsBreakdown {
    std::vector<LayerFlops> per_layer;
    double total = 0.0;
    double total_full = 0.0;       // same config/layout, no plan
    double ratio_vs_full = 1.0;    // total / total_full
    double total_sans_probe = 0.0; // alternate counting: probe not charged
    double ratio_sans_probe = 1.0;
    std::size_t live_tokens_final = 0;

    json to_json() const {
        json layers = json::array();
        for (const LayerFlops& l : per_layer)
            layers.push_back({{"attn_proj", l.attn_proj},
                              {"attn_core", l.attn_core},
                              {"ffn", l.ffn},
                              {"probe_overhead", l.probe_overhead}});
        return json{{"per_layer", std::move(layers)},
                    {"total", total},
                    {"total_full", total_full},
                    {"ratio_vs_full", ratio_vs_full},
                    {"total_sans_probe", total_sans_probe},
                    {"ratio_sans_probe", ratio_sans_probe},
                    {"live_tokens_final", live_tokens_final}};
    }
};

inline std::size_t mask_pair_count(const AttentionMask& mask) {
    std::size_t c = 0;
    for (std::uint8_t v : mask.allowed) c += v;
    return c;
}

/// Exact operation counts for a forward pass of `config` over `layout`
/// under `plan` (nullptr = unreduced). Token pruning shrinks the live
/// sequence for all later layers; the analytic convention keeps the
/// lowest-position visual tokens, which fixes the interleaving later
/// hollow masks are counted on.
inline FlopsBreakdown count_flops(const ModelConfig& cfg, const TokenLayout& layout,
                                  const ReductionPlan* plan) {
    cfg.validate();
    if (layout.size() == 0) fail("count_flops: empty layout");
    if (plan) plan->validate_for_layers(cfg.n_layers);

    const double d = static_cast<double>(cfg.d_model);
    const double dff = static_cast<double>(cfg.d_ff);
    const double c_ffn = cfg.ffn_kind == FfnKind::vanilla ? 4.0 : 6.0;
    const double c_probe = cfg.ffn_kind == FfnKind::vanilla ? 2.0 : 4.0;

    FlopsBreakdown bd;
    bd.per_layer.resize(cfg.n_layers);

    TokenLayout live = layout;
    // Pair counts per mask kind for the current live layout, computed
    // lazily; the layout changes at most once (single pruning step).
    double causal_pairs = -1.0, hollow_pairs = -1.0;

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const bool attn_reduced = plan && plan->attn_layers.count(l) > 0;
        const bool ffn_reduced = plan && plan->ffn_layers.count(l) > 0;
        const double n = static_cast<double>(live.size());
        LayerFlops& lf = bd.per_layer[l];

        lf.attn_proj = 8.0 * n * d * d;

        if (attn_reduced) {
            if (hollow_pairs < 0.0)
                hollow_pairs = static_cast<double>(
                    mask_pair_count(hollow_mask_scoped(live, plan->R_A, plan->scope)));
            lf.attn_core = 4.0 * d * hollow_pairs;
        } else {
            if (causal_pairs < 0.0)
                causal_pairs = n * (n + 1.0) / 2.0;
            lf.attn_core = 4.0 * d * causal_pairs;
        }

        bool reduced_rows = false;
        if (ffn_reduced) {
            const std::size_t n_red = scope_rows(live, plan->scope).size();
            const std::size_t k = plan->k_count(cfg.d_ff);
            if (n_red > 0 && k < cfg.d_ff) {
                reduced_rows = true;
                const double nr = static_cast<double>(n_red);
                lf.ffn = c_ffn * (n - nr) * d * dff +
                         c_ffn * nr * d * static_cast<double>(k);
                lf.probe_overhead =
                    c_probe * static_cast<double>(plan->probe_count(n_red)) * d * dff;
            }
        }
        if (!reduced_rows) lf.ffn = c_ffn * n * d * dff;

        if (plan && plan->pruning && plan->pruning->at_layer == l) {
            const std::vector<std::size_t> visual = live.visual_positions();
            const auto keep = static_cast<std::size_t>(std::ceil(
                plan->pruning->keep_ratio * static_cast<double>(visual.size())));
            std::vector<Token> tags;
            tags.reserve(live.size());
            std::size_t kept_visual = 0;
            for (std::size_t p = 0; p < live.size(); ++p) {
                if (!live.is_visual(p)) tags.push_back(Token::text);
                else if (kept_visual < keep) { tags.push_back(Token::visual); ++kept_visual; }
            }
            live = TokenLayout(std::move(tags));
            causal_pairs = hollow_pairs = -1.0;
        }
    }

    bd.live_tokens_final = live.size();
    for (const LayerFlops& lf : bd.per_layer) {
        bd.total += lf.total();
        bd.total_sans_probe += lf.total() - lf.probe_overhead;
    }

    if (plan) {
        FlopsBreakdown full = count_flops(cfg, layout, nullptr);
        bd.total_full = full.total;
    } else {
        bd.total_full = bd.total;
    }
    bd.ratio_vs_full = bd.total / bd.total_full;
    bd.ratio_sans_probe = bd.total_sans_probe / bd.total_full;
    return bd;
}

/// Reference large-model scenario: 32 gated layers at d=4096, d_ff=14336,
/// a 64/3072/64 text-visual-text layout, hollow attention on the last 16
/// layers and dynamic FFN on the last 17 (R_A=256, K=20%, M=10%). Token
/// counts are part of the scenario definition so the arithmetic is
/// auditable.
struct FlopsScenario {
    std::string name;
    ModelConfig config;
    TokenLayout layout;
    ReductionPlan plan;
};

inline FlopsScenario internvl2_table1_scenario() {
    FlopsScenario s;
    s.name = "internvl2-table1";
    s.config.n_layers = 32;
    s.config.d_model = 4096;
    s.config.d_ff = 14336;
    s.config.n_heads = 32;
    s.config.ffn_kind = FfnKind::gated;
    s.config.vocab_size = 32000;
    s.config.act = Activation::silu;
    s.layout = TokenLayout::blocks(64, 3072, 64);
    for (std::size_t l = 16; l < 32; ++l) s.plan.attn_layers.insert(l);
    for (std::size_t l = 15; l < 32; ++l) s.plan.ffn_layers.insert(l);
    s.plan.R_A = 256;
    s.plan.k_fraction = 0.2;
    s.plan.probe_fraction = 0.1;
    s.plan.scope = Scope::visual_only;
    return s;
}

}  // namespace lens

#endif  // LENS_FLOPS_HPP
