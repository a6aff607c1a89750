// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef LENS_PLAN_HPP
#define LENS_PLAN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lens/error.hpp"

namespace lens {

using json = nlohmann::json;

/// Which rows of a layer receive the reductions.
enum class Scope { visual_only, all_tokens };

inline Scope parse_scope(const std::string& s) {
    if (s == "visual_only") return Scope::visual_only;
    if (s == "all_tokens") return Scope::all_tokens;
    fail("unknown scope '" + s + "' (expected visual_only or all_tokens)");
}

inline std::string to_string(Scope s) {
    return s == Scope::visual_only ? "visual_only" : "all_tokens";
}

/// Token-pruning step: after layer `at_layer`, keep the ceil(keep_ratio *
/// n_visual) visual positions receiving the most attention; all text
/// positions survive.
struct PruningSpec {
    std::size_t at_layer = 0;
    double keep_ratio = 1.0;
};

/// Everything a reduced forward pass needs to know: which layers get the
/// attention and FFN reductions and with which hyperparameters.
struct ReductionPlan {
    std::set<std::size_t> attn_layers;
    std::set<std::size_t> ffn_layers;
    std::size_t R_A = 256;        // visual-to-visual look-back window
    double k_fraction = 0.2;      // activated hidden units, K = ceil(k_fraction * d_ff)
    double probe_fraction = 0.1;  // sampled rows, M = max(1, ceil(probe_fraction * N))
    Scope scope = Scope::visual_only;
    std::optional<PruningSpec> pruning;

    bool is_noop() const { return attn_layers.empty() && ffn_layers.empty() && !pruning; }

    std::size_t k_count(std::size_t d_ff) const {
        return static_cast<std::size_t>(
            std::ceil(k_fraction * static_cast<double>(d_ff)));
    }
    std::size_t probe_count(std::size_t n_scope) const {
        const auto m = static_cast<std::size_t>(
            std::ceil(probe_fraction * static_cast<double>(n_scope)));
        return std::max<std::size_t>(1, m);
    }

    /// Parameter-range checks that do not need the model (layer bounds are
    /// validated against a config at the point of use).
    void validate() const {
        if (R_A < 1) fail("plan: R_A must be >= 1");
        if (!(k_fraction > 0.0 && k_fraction <= 1.0))
            fail("plan: k_fraction must be in (0, 1]");
        if (!(probe_fraction > 0.0 && probe_fraction <= 1.0))
            fail("plan: probe_fraction must be in (0, 1]");
        if (pruning && !(pruning->keep_ratio > 0.0 && pruning->keep_ratio <= 1.0))
            fail("plan: pruning.keep_ratio must be in (0, 1]");
    }

    void validate_for_layers(std::size_t n_layers) const {
        validate();
        for (std::size_t l : attn_layers)
            if (l >= n_layers)
                fail("plan: attn layer index " + std::to_string(l) +
                     " out of range (model has " + std::to_string(n_layers) + " layers)");
        for (std::size_t l : ffn_layers)
            if (l >= n_layers)
                fail("plan: ffn layer index " + std::to_string(l) +
                     " out of range (model has " + std::to_string(n_layers) + " layers)");
        if (pruning && pruning->at_layer >= n_layers)
            fail("plan: pruning.at_layer " + std::to_string(pruning->at_layer) +
                 " out of range (model has " + std::to_string(n_layers) + " layers)");
    }
};

/// Sorted ascending set of activated hidden-unit indices.
struct Selection {
    std::vector<std::size_t> indices;

    static Selection full(std::size_t d_ff) {
        Selection s;
        s.indices.resize(d_ff);
        for (std::size_t i = 0; i < d_ff; ++i) s.indices[i] = i;
        return s;
    }

    std::size_t size() const { return indices.size(); }

    void validate(std::size_t d_ff) const {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= d_ff)
                fail("selection: index " + std::to_string(indices[i]) +
                     " out of range for d_ff " + std::to_string(d_ff));
            if (i > 0 && indices[i] <= indices[i - 1])
                fail("selection: indices must be strictly increasing");
        }
    }
};

inline json plan_to_json(const ReductionPlan& p) {
    json j;
    j["attn_layers"] = std::vector<std::size_t>(p.attn_layers.begin(), p.attn_layers.end());
    j["ffn_layers"] = std::vector<std::size_t>(p.ffn_layers.begin(), p.ffn_layers.end());
    j["R_A"] = p.R_A;
    j["k_fraction"] = p.k_fraction;
    j["probe_fraction"] = p.probe_fraction;
    j["scope"] = to_string(p.scope);
    if (p.pruning) {
        j["pruning"] = {{"at_layer", p.pruning->at_layer},
                        {"keep_ratio", p.pruning->keep_ratio}};
    } else {
        j["pruning"] = nullptr;
    }
    return j;
}

inline ReductionPlan plan_from_json(const json& j) {
    ReductionPlan p;
    try {
        for (const auto& v : j.at("attn_layers")) p.attn_layers.insert(v.get<std::size_t>());
        for (const auto& v : j.at("ffn_layers")) p.ffn_layers.insert(v.get<std::size_t>());
        p.R_A = j.at("R_A").get<std::size_t>();
        p.k_fraction = j.at("k_fraction").get<double>();
        p.probe_fraction = j.at("probe_fraction").get<double>();
        p.scope = parse_scope(j.at("scope").get<std::string>());
        if (j.contains("pruning") && !j.at("pruning").is_null()) {
            PruningSpec ps;
            ps.at_layer = j.at("pruning").at("at_layer").get<std::size_t>();
            ps.keep_ratio = j.at("pruning").at("keep_ratio").get<double>();
            p.pruning = ps;
        }
    } catch (const json::exception& e) {
        fail(std::string("plan: malformed JSON: ") + e.what());
    }
    p.validate();
    return p;
}

}  // namespace lens

#endif  // LENS_PLAN_HPP
