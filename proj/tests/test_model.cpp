// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "lens/model.hpp"

using namespace lens;
using Catch::Matchers::WithinAbs;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_layers = 3;
    cfg.d_model = 16;
    cfg.d_ff = 24;
    cfg.n_heads = 2;
    cfg.vocab_size = 48;
    return cfg;
}

std::vector<std::uint32_t> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
    std::vector<std::uint32_t> ids(n);
    for (auto& id : ids) id = static_cast<std::uint32_t>(rng.uniform_below(vocab));
    return ids;
}

bool same_tensors(const Checkpoint& a, const Checkpoint& b) {
    const auto ea = tensor_entries(a);
    const auto eb = tensor_entries(b);
    if (ea.size() != eb.size()) return false;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        if (ea[i].name != eb[i].name || ea[i].shape != eb[i].shape) return false;
        for (std::size_t j = 0; j < ea[i].count; ++j)
            if (ea[i].data[j] != eb[i].data[j]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("model config validation") {
    ModelConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.n_layers = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = tiny_config();
    cfg.n_heads = 3;  // 16 % 3 != 0
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("divisible"));
}

TEST_CASE("random_init") {
    SECTION("identical config and seed give identical tensors") {
        const Checkpoint a = random_init(tiny_config(), 42);
        const Checkpoint b = random_init(tiny_config(), 42);
        CHECK(same_tensors(a, b));
    }
    SECTION("different seeds share the manifest but differ in values") {
        const Checkpoint a = random_init(tiny_config(), 1);
        const Checkpoint b = random_init(tiny_config(), 2);
        const auto ea = tensor_entries(a);
        const auto eb = tensor_entries(b);
        REQUIRE(ea.size() == eb.size());
        bool any_diff = false;
        for (std::size_t i = 0; i < ea.size(); ++i) {
            CHECK(ea[i].name == eb[i].name);
            CHECK(ea[i].shape == eb[i].shape);
            for (std::size_t j = 0; j < ea[i].count; ++j)
                any_diff |= ea[i].data[j] != eb[i].data[j];
        }
        CHECK(any_diff);
    }
    SECTION("tensor counts: 2 + L*10 + 2 vanilla, 2 + L*9 + 2 gated") {
        ModelConfig cfg;
        cfg.n_layers = 2;
        cfg.d_model = 8;
        cfg.d_ff = 16;
        cfg.n_heads = 2;
        cfg.vocab_size = 16;
        cfg.ffn_kind = FfnKind::vanilla;
        CHECK(cfg.tensor_count() == 24);
        CHECK(tensor_entries(random_init(cfg, 3)).size() == 24);
        cfg.ffn_kind = FfnKind::gated;
        CHECK(cfg.tensor_count() == 22);
        CHECK(tensor_entries(random_init(cfg, 3)).size() == 22);
    }
    SECTION("gains are one, biases zero, weights small") {
        const Checkpoint c = random_init(tiny_config(), 5);
        for (double v : c.layers[0].attn_norm_gain) CHECK(v == 1.0);
        for (double v : c.final_norm_gain) CHECK(v == 1.0);
        for (double v : c.layers[1].b1) CHECK(v == 0.0);
        double sq = 0.0;
        for (double v : c.tok_embeddings.data) sq += v * v;
        const double stddev = std::sqrt(sq / c.tok_embeddings.data.size());
        CHECK_THAT(stddev, WithinAbs(0.02, 0.005));
    }
}

TEST_CASE("causal_mask") {
    CHECK(causal_mask(1).at(0, 0));
    auto count = [](const AttentionMask& m) {
        std::size_t c = 0;
        for (auto v : m.allowed) c += v;
        return c;
    };
    CHECK(count(causal_mask(3)) == 6);
    CHECK(count(causal_mask(4)) == 10);
    CHECK_THROWS_AS(causal_mask(0), Error);
}

TEST_CASE("forward basics") {
    const Checkpoint ckpt = random_init(tiny_config(), 7);
    const TokenLayout layout = TokenLayout::from_string("TTVVVVVVTT");
    Rng rng(8);
    const auto ids = random_ids(layout.size(), ckpt.config.vocab_size, rng);

    SECTION("deterministic and layout-tag dependent only") {
        const ForwardResult a = forward(ckpt, ids, layout, nullptr, 1);
        const ForwardResult b = forward(ckpt, ids, layout, nullptr, 1);
        CHECK(a.logits.data == b.logits.data);
        const TokenLayout rebuilt = TokenLayout::from_string(layout.to_string());
        const ForwardResult c = forward(ckpt, ids, rebuilt, nullptr, 99);
        CHECK(a.logits.data == c.logits.data);  // seed only drives probing
        CHECK(a.positions.size() == layout.size());
    }
    SECTION("empty plan is bitwise the no-plan forward") {
        ReductionPlan plan;  // empty layer sets
        const ForwardResult a = forward(ckpt, ids, layout, nullptr, 1);
        const ForwardResult b = forward(ckpt, ids, layout, &plan, 1);
        CHECK(a.logits.data == b.logits.data);
    }
    SECTION("full-selection dynamic FFN is bitwise the unreduced forward") {
        ReductionPlan plan;
        for (std::size_t l = 0; l < ckpt.config.n_layers; ++l)
            plan.ffn_layers.insert(l);
        plan.k_fraction = 1.0;
        plan.probe_fraction = 1.0;
        const ForwardResult a = forward(ckpt, ids, layout, nullptr, 1);
        const ForwardResult b = forward(ckpt, ids, layout, &plan, 1);
        CHECK(a.logits.data == b.logits.data);
    }
    SECTION("hollow attention with a covering window is bitwise unreduced") {
        ReductionPlan plan;
        for (std::size_t l = 0; l < ckpt.config.n_layers; ++l)
            plan.attn_layers.insert(l);
        plan.R_A = layout.n_visual();  // window covers every ordinal gap
        const ForwardResult a = forward(ckpt, ids, layout, nullptr, 1);
        const ForwardResult b = forward(ckpt, ids, layout, &plan, 1);
        CHECK(a.logits.data == b.logits.data);
    }
    SECTION("reductions with small K and window actually change the output") {
        ReductionPlan plan;
        plan.attn_layers = {0, 1, 2};
        plan.ffn_layers = {0, 1, 2};
        plan.R_A = 1;
        plan.k_fraction = 0.1;
        const ForwardResult a = forward(ckpt, ids, layout, nullptr, 1);
        const ForwardResult b = forward(ckpt, ids, layout, &plan, 1);
        CHECK(a.logits.data != b.logits.data);
    }
    SECTION("visual-only reductions never touch an all-text sequence") {
        const TokenLayout text_layout = TokenLayout::from_string("TTTTTTTT");
        Rng r2(9);
        const auto tids = random_ids(text_layout.size(), ckpt.config.vocab_size, r2);
        ReductionPlan plan;
        plan.attn_layers = {0, 1, 2};
        plan.ffn_layers = {0, 1, 2};
        plan.R_A = 1;
        plan.k_fraction = 0.05;
        plan.scope = Scope::visual_only;
        const ForwardResult a = forward(ckpt, tids, text_layout, nullptr, 1);
        const ForwardResult b = forward(ckpt, tids, text_layout, &plan, 1);
        CHECK(a.logits.data == b.logits.data);
    }
    SECTION("errors") {
        auto bad_ids = ids;
        bad_ids[0] = static_cast<std::uint32_t>(ckpt.config.vocab_size);
        CHECK_THROWS_WITH(forward(ckpt, bad_ids, layout, nullptr, 1),
                          Catch::Matchers::ContainsSubstring("token id"));
        ReductionPlan plan;
        plan.ffn_layers = {ckpt.config.n_layers};
        CHECK_THROWS_WITH(forward(ckpt, ids, layout, &plan, 1),
                          Catch::Matchers::ContainsSubstring("out of range"));
        CHECK_THROWS_AS(forward(ckpt, {1, 2}, layout, nullptr, 1), Error);
    }
}

TEST_CASE("forward with probe-driven FFN reduction") {
    const Checkpoint ckpt = random_init(tiny_config(), 17);
    const TokenLayout layout = TokenLayout::from_string("TTVVVVVVVVTT");
    Rng rng(18);
    const auto ids = random_ids(layout.size(), ckpt.config.vocab_size, rng);

    ReductionPlan plan;
    plan.ffn_layers = {0, 2};
    plan.k_fraction = 0.5;
    plan.probe_fraction = 0.5;

    SECTION("same seed reproduces, different seed may differ") {
        const ForwardResult a = forward(ckpt, ids, layout, &plan, 4);
        const ForwardResult b = forward(ckpt, ids, layout, &plan, 4);
        CHECK(a.logits.data == b.logits.data);
    }
    SECTION("full probe fraction makes the seed irrelevant") {
        plan.probe_fraction = 1.0;
        const ForwardResult a = forward(ckpt, ids, layout, &plan, 4);
        const ForwardResult b = forward(ckpt, ids, layout, &plan, 1234);
        CHECK(a.logits.data == b.logits.data);
    }
}

TEST_CASE("forward with token pruning") {
    const Checkpoint ckpt = random_init(tiny_config(), 27);
    const TokenLayout layout = TokenLayout::from_string("TTVVVVVVTT");
    Rng rng(28);
    const auto ids = random_ids(layout.size(), ckpt.config.vocab_size, rng);

    ReductionPlan plan;
    plan.pruning = PruningSpec{1, 0.5};

    const ForwardResult res = forward(ckpt, ids, layout, &plan, 1);
    SECTION("keeps all text positions and the right number of rows") {
        // 4 text + ceil(0.5 * 6) = 3 visual survivors
        REQUIRE(res.positions.size() == 7);
        REQUIRE(res.logits.rows == 7);
        for (std::size_t p : layout.text_positions())
            CHECK(std::find(res.positions.begin(), res.positions.end(), p) !=
                  res.positions.end());
        for (std::size_t i = 1; i < res.positions.size(); ++i)
            CHECK(res.positions[i] > res.positions[i - 1]);
    }
    SECTION("records attention at the pruning layer") {
        CHECK(res.attention_received[1].size() == layout.size());
        CHECK(res.attention_received[0].empty());
    }
    SECTION("text rows keep their unpruned identity up to the pruning layer") {
        // with pruning at the last layer, logits of surviving rows match the
        // unpruned forward bitwise (nothing downstream changes)
        ReductionPlan last;
        last.pruning = PruningSpec{ckpt.config.n_layers - 1, 0.5};
        const ForwardResult full = forward(ckpt, ids, layout, nullptr, 1);
        const ForwardResult pr = forward(ckpt, ids, layout, &last, 1);
        for (std::size_t r = 0; r < pr.positions.size(); ++r)
            for (std::size_t c = 0; c < pr.logits.cols; ++c)
                CHECK(pr.logits(r, c) == full.logits(pr.positions[r], c));
    }
}

TEST_CASE("forward stays finite under arbitrary plans") {
    Rng rng(47);
    for (int t = 0; t < 10; ++t) {
        ModelConfig cfg;
        cfg.n_layers = 2 + rng.uniform_below(2);
        cfg.n_heads = 1 + rng.uniform_below(2);
        cfg.d_model = cfg.n_heads * 8;
        cfg.d_ff = 16 + rng.uniform_below(16);
        cfg.vocab_size = 32;
        cfg.ffn_kind = t % 2 ? FfnKind::gated : FfnKind::vanilla;
        const Checkpoint ckpt = random_init(cfg, rng.next_u64());

        std::vector<Token> tags(4 + rng.uniform_below(12));
        for (Token& tag : tags)
            tag = rng.uniform_below(2) ? Token::visual : Token::text;
        const TokenLayout layout{tags};
        const auto ids = random_ids(layout.size(), cfg.vocab_size, rng);

        ReductionPlan plan;
        plan.R_A = 1 + rng.uniform_below(4);
        plan.k_fraction = 0.05 + 0.9 * rng.uniform01();
        plan.probe_fraction = 0.05 + 0.9 * rng.uniform01();
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            if (rng.uniform_below(2)) plan.attn_layers.insert(l);
            if (rng.uniform_below(2)) plan.ffn_layers.insert(l);
        }
        plan.scope = rng.uniform_below(2) ? Scope::visual_only : Scope::all_tokens;
        if (layout.n_visual() > 0 && rng.uniform_below(2))
            plan.pruning = PruningSpec{rng.uniform_below(cfg.n_layers),
                                       0.25 + 0.75 * rng.uniform01()};

        const ForwardResult res = forward(ckpt, ids, layout, &plan, t);
        CHECK(all_finite(res.logits));
        CHECK(res.logits.rows == res.positions.size());
    }
}

TEST_CASE("attention recording sums to one per layer") {
    const Checkpoint ckpt = random_init(tiny_config(), 37);
    const TokenLayout layout = TokenLayout::from_string("TVVVT");
    Rng rng(38);
    const auto ids = random_ids(layout.size(), ckpt.config.vocab_size, rng);
    ForwardOptions opts;
    opts.record_attention = true;
    const ForwardResult res = forward(ckpt, ids, layout, nullptr, 1, opts);
    for (std::size_t l = 0; l < ckpt.config.n_layers; ++l) {
        REQUIRE(res.attention_received[l].size() == layout.size());
        double sum = 0.0;
        for (double v : res.attention_received[l]) sum += v;
        CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
    }
}
