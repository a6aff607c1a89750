// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// lens: redundancy analysis for a toy multimodal decoder.
//
//   lens gen        generate a random toy checkpoint
//   lens gen-batch  generate a synthetic validation batch (JSONL)
//   lens rank       greedy layer-ranking search for one reduction target
//   lens sweep      apply reductions at increasing layer fractions; CSV+SVG
//   lens flops      analytic FLOPs report for a config/layout/plan
//   lens eval       score a single plan on a validation batch

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lens/checkpoint_io.hpp"
#include "lens/flops.hpp"
#include "lens/model.hpp"
#include "lens/plan.hpp"
#include "lens/ranker.hpp"
#include "lens/svg.hpp"

namespace {

using namespace lens;

// Shortest decimal form that parses back to the same double.
std::string fmt12(double v) {
    char buf[64];
    for (int prec = 12; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

json load_json_file(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(path + ": " + e.what());
    }
}

struct ConfigFlags {
    std::size_t layers = 8, d_model = 64, d_ff = 256, heads = 4, vocab = 512;
    std::string ffn_kind = "vanilla";
    std::string activation = "relu";

    void attach(CLI::App* cmd) {
        cmd->add_option("--layers", layers, "number of decoder layers");
        cmd->add_option("--d-model", d_model, "model width");
        cmd->add_option("--d-ff", d_ff, "FFN hidden width");
        cmd->add_option("--heads", heads, "attention heads");
        cmd->add_option("--vocab", vocab, "vocabulary size");
        cmd->add_option("--ffn-kind", ffn_kind, "vanilla | gated");
        cmd->add_option("--activation", activation, "relu | silu");
    }

    ModelConfig to_config() const {
        ModelConfig cfg;
        cfg.n_layers = layers;
        cfg.d_model = d_model;
        cfg.d_ff = d_ff;
        cfg.n_heads = heads;
        cfg.vocab_size = vocab;
        cfg.ffn_kind = parse_ffn_kind(ffn_kind);
        cfg.act = parse_activation(activation);
        cfg.validate();
        return cfg;
    }
};

struct PlanFlags {
    std::size_t ra = 256;
    double k_fraction = 0.2;
    double probe_fraction = 0.1;
    std::string scope = "visual_only";

    void attach(CLI::App* cmd) {
        cmd->add_option("--ra", ra, "hollow attention range R_A");
        cmd->add_option("--k-fraction", k_fraction, "activated FFN unit fraction");
        cmd->add_option("--probe-fraction", probe_fraction, "probe sample fraction");
        cmd->add_option("--scope", scope, "visual_only | all_tokens");
    }

    ReductionPlan to_template() const {
        ReductionPlan p;
        p.R_A = ra;
        p.k_fraction = k_fraction;
        p.probe_fraction = probe_fraction;
        p.scope = parse_scope(scope);
        p.validate();
        return p;
    }
};

// ---------------------------------------------------------------- gen ----

int cmd_gen(const ConfigFlags& cf, std::uint64_t seed, const std::string& out) {
    const ModelConfig cfg = cf.to_config();
    Checkpoint ckpt = random_init(cfg, seed);
    save_checkpoint(ckpt, out);

    std::size_t params = 0;
    for (const TensorRef& t : tensor_entries(ckpt)) {
        std::string shape;
        for (std::size_t v : t.shape)
            shape += (shape.empty() ? "" : "x") + std::to_string(v);
        std::printf("%-28s %12s  offset %zu\n", t.name.c_str(), shape.c_str(),
                    params * 4);
        params += t.count;
    }
    std::printf("%zu tensors, %zu parameters (%zu bytes)\n",
                tensor_entries(ckpt).size(), params, params * 4);
    std::printf("wrote %s and %s\n", manifest_path(out).string().c_str(),
                blob_path(out).string().c_str());
    return 0;
}

// ---------------------------------------------------------- gen-batch ----

int cmd_gen_batch(std::uint64_t seed, std::size_t items, std::size_t prefix,
                  std::size_t visual, std::size_t suffix, std::size_t vocab,
                  const std::vector<std::string>& subsets, const std::string& out) {
    if (items == 0) fail("gen-batch: need at least one item");
    if (subsets.empty()) fail("gen-batch: need at least one subset name");
    if (prefix + visual + suffix == 0) fail("gen-batch: empty layout");

    ValidationBatch batch;
    for (std::size_t i = 0; i < items; ++i) {
        Rng rng = Rng::substream(seed, i);
        BatchItem item;
        item.layout = TokenLayout::blocks(prefix, visual, suffix);
        item.ids.reserve(item.layout.size());
        for (std::size_t p = 0; p < item.layout.size(); ++p)
            item.ids.push_back(static_cast<std::uint32_t>(rng.uniform_below(vocab)));
        item.subset = subsets[i % subsets.size()];
        batch.items.push_back(std::move(item));
    }
    write_file_atomic(out, batch_to_jsonl(batch));
    std::printf("wrote %zu items (%zu subsets) to %s\n", batch.items.size(),
                batch.subsets().size(), out.c_str());
    return 0;
}

// --------------------------------------------------------------- rank ----

int cmd_rank(const std::string& ckpt_path, const std::string& batch_path,
             const std::string& target_str, long lp_flag, double alpha,
             const PlanFlags& pf, std::uint64_t seed, std::size_t threads,
             const std::string& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::ifstream in(batch_path);
    if (!in) fail("cannot open '" + batch_path + "'");
    const ValidationBatch batch = batch_from_jsonl(in, batch_path);
    const Target target = parse_target(target_str);

    const std::size_t L = ckpt.config.n_layers;
    const std::size_t lp = lp_flag < 0 ? L / 4 : static_cast<std::size_t>(lp_flag);
    if (lp > L) fail("rank: --lp exceeds layer count " + std::to_string(L));

    ScoreConfig score_cfg;
    score_cfg.alpha = alpha;
    SearchOptions opts;
    opts.workers = threads;

    const RankingResult res = hybrid_ranking(ckpt, batch, target, lp,
                                             pf.to_template(), score_cfg, seed, opts);

    if (lp > 0) {
        std::string tail;
        for (std::size_t i = 0; i < lp; ++i)
            tail += (i ? " " : "") + std::to_string(res.ranked[i]);
        std::printf("position-ranked tail: %s\n", tail.c_str());
    }
    const std::size_t s = L - lp;
    std::size_t idx = 0;
    for (std::size_t r = 0; r < s; ++r) {
        const std::size_t m = s - r;
        double best = res.eval_log[idx].score;
        for (std::size_t i = 1; i < m; ++i)
            best = std::max(best, res.eval_log[idx + i].score);
        std::printf("round %zu: layer %zu  score %s  (%zu candidates)\n", r + 1,
                    res.ranked[lp + r], fmt12(best).c_str(), m);
        idx += m;
    }
    std::printf("ranked: ");
    for (std::size_t i = 0; i < res.ranked.size(); ++i)
        std::printf("%s%zu", i ? " " : "", res.ranked[i]);
    std::printf("\n%zu oracle evaluations\n", res.eval_log.size());

    write_file_atomic(out, ranking_to_json(res).dump(2) + "\n");
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

// -------------------------------------------------------------- sweep ----

struct SweepTarget {
    std::string name;  // attention | ffn | both
    const RankingResult* attn;
    const RankingResult* ffn;
};

int cmd_sweep(const std::string& ckpt_path, const std::string& batch_path,
              const std::string& rank_attn_path, const std::string& rank_ffn_path,
              std::vector<std::string> targets, std::vector<double> fractions,
              const PlanFlags& pf, double alpha, std::uint64_t seed,
              const std::string& out_prefix, bool emit_plans) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::ifstream in(batch_path);
    if (!in) fail("cannot open '" + batch_path + "'");
    const ValidationBatch batch = batch_from_jsonl(in, batch_path);
    const std::size_t L = ckpt.config.n_layers;

    std::optional<RankingResult> rank_attn, rank_ffn;
    if (!rank_attn_path.empty())
        rank_attn = ranking_from_json(load_json_file(rank_attn_path));
    if (!rank_ffn_path.empty())
        rank_ffn = ranking_from_json(load_json_file(rank_ffn_path));

    if (targets.empty()) targets = {"attention", "ffn"};
    std::vector<SweepTarget> plan_targets;
    for (const std::string& t : targets) {
        if (t == "attention") {
            if (!rank_attn) fail("sweep: target attention needs --rank-attention");
            plan_targets.push_back({t, &*rank_attn, nullptr});
        } else if (t == "ffn") {
            if (!rank_ffn) fail("sweep: target ffn needs --rank-ffn");
            plan_targets.push_back({t, nullptr, &*rank_ffn});
        } else if (t == "both") {
            if (!rank_attn || !rank_ffn)
                fail("sweep: target both needs --rank-attention and --rank-ffn");
            plan_targets.push_back({t, &*rank_attn, &*rank_ffn});
        } else {
            fail("sweep: unknown target '" + t + "'");
        }
    }

    if (fractions.empty())
        for (std::size_t i = 0; i <= L; ++i)
            fractions.push_back(static_cast<double>(i) / static_cast<double>(L));
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] < 0.0 || fractions[i] > 1.0)
            fail("sweep: fractions must lie in [0, 1]");
        if (i > 0 && fractions[i] < fractions[i - 1])
            fail("sweep: fractions must be sorted ascending");
    }

    const ReductionPlan tmpl = pf.to_template();
    const DivergenceOracle oracle(ckpt, batch, seed);
    const std::vector<std::string> subset_names = batch.subsets();

    std::string csv = "fraction,target,scope,divergence,penalty_score,flops_ratio\n";
    std::map<std::string, SvgSeries> series;
    series["attention"].color = "#1f77b4";
    series["ffn"].color = "#d62728";
    series["both"].color = "#2ca02c";

    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        const double fraction = fractions[fi];
        for (const SweepTarget& st : plan_targets) {
            const ReductionPlan plan =
                plan_for_fraction(st.attn, st.ffn, fraction, tmpl, L);

            double total_div = 0.0;
            std::map<std::string, std::pair<double, std::size_t>> acc;
            for (std::size_t i = 0; i < batch.items.size(); ++i) {
                const double d = oracle.item_divergence(i, plan);
                total_div += d;
                auto& a = acc[batch.items[i].subset];
                a.first += d;
                a.second += 1;
            }
            const double divergence = total_div / static_cast<double>(batch.items.size());
            std::vector<double> deltas;
            for (const std::string& name : subset_names)
                deltas.push_back(-(acc[name].first / static_cast<double>(acc[name].second)));
            const double penalty = penalty_score(deltas, alpha);

            double flops_plan = 0.0, flops_full = 0.0;
            for (const BatchItem& item : batch.items) {
                flops_plan += count_flops(ckpt.config, item.layout, &plan).total;
                flops_full += count_flops(ckpt.config, item.layout, nullptr).total;
            }
            const double flops_ratio = flops_plan / flops_full;

            csv += fmt12(fraction) + "," + st.name + "," + to_string(plan.scope) + "," +
                   fmt12(divergence) + "," + fmt12(penalty) + "," + fmt12(flops_ratio) +
                   "\n";
            series[st.name].points.emplace_back(fraction, penalty);

            if (emit_plans) {
                const std::string plan_path = out_prefix + "_plan_" + st.name + "_f" +
                                              std::to_string(fi) + ".json";
                write_file_atomic(plan_path, plan_to_json(plan).dump(2) + "\n");
            }
            std::printf("fraction %-8s target %-9s divergence %-14s penalty %-14s "
                        "flops %.4f\n",
                        fmt12(fraction).c_str(), st.name.c_str(),
                        fmt12(divergence).c_str(), fmt12(penalty).c_str(), flops_ratio);
        }
    }

    write_file_atomic(out_prefix + ".csv", csv);
    std::printf("wrote %s.csv\n", out_prefix.c_str());
    for (const SweepTarget& st : plan_targets) {
        SvgSeries s = series[st.name];
        s.label = st.name;
        const std::string path = out_prefix + "_" + st.name + ".svg";
        write_file_atomic(path,
                          render_line_chart("reduction sweep: " + st.name + " (" +
                                                to_string(tmpl.scope) + ")",
                                            "fraction of layers reduced",
                                            "penalty score", {s}));
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

// -------------------------------------------------------------- flops ----

int cmd_flops(const std::string& preset, const std::string& ckpt_path,
              const ConfigFlags& cf, const std::string& plan_path,
              std::size_t text_prefix, std::size_t visual, std::size_t text_suffix,
              const std::string& json_out) {
    ModelConfig cfg;
    TokenLayout layout;
    std::optional<ReductionPlan> plan;

    if (!preset.empty()) {
        if (preset != "internvl2-table1") fail("unknown preset '" + preset + "'");
        const FlopsScenario sc = internvl2_table1_scenario();
        cfg = sc.config;
        layout = sc.layout;
        plan = sc.plan;
        std::printf("preset %s: L=%zu d_model=%zu d_ff=%zu %s FFN\n", sc.name.c_str(),
                    cfg.n_layers, cfg.d_model, cfg.d_ff,
                    to_string(cfg.ffn_kind).c_str());
        std::printf("layout: 64 text + 3072 visual + 64 text (assumed token counts)\n");
        std::printf("plan: %zu attn layers, %zu ffn layers, R_A=%zu, K=%.0f%%, M=%.0f%%\n",
                    plan->attn_layers.size(), plan->ffn_layers.size(), plan->R_A,
                    plan->k_fraction * 100, plan->probe_fraction * 100);
    } else {
        if (!ckpt_path.empty()) {
            cfg = load_checkpoint(ckpt_path).config;
        } else {
            cfg = cf.to_config();
        }
        layout = TokenLayout::blocks(text_prefix, visual, text_suffix);
        if (!plan_path.empty())
            plan = plan_from_json(load_json_file(plan_path));
    }

    const FlopsBreakdown bd =
        count_flops(cfg, layout, plan ? &*plan : nullptr);

    std::printf("%-6s %16s %16s %16s %16s\n", "layer", "attn_proj", "attn_core",
                "ffn", "probe");
    for (std::size_t l = 0; l < bd.per_layer.size(); ++l) {
        const LayerFlops& lf = bd.per_layer[l];
        std::printf("%-6zu %16.0f %16.0f %16.0f %16.0f\n", l, lf.attn_proj,
                    lf.attn_core, lf.ffn, lf.probe_overhead);
    }
    std::printf("total: %.0f (full: %.0f)\n", bd.total, bd.total_full);
    std::printf("flops ratio: %s\n", fmt3(bd.ratio_vs_full).c_str());
    if (std::abs(bd.ratio_vs_full - bd.ratio_sans_probe) > 0.005)
        std::printf("flops ratio (probe excluded): %s\n",
                    fmt3(bd.ratio_sans_probe).c_str());

    if (!json_out.empty()) {
        write_file_atomic(json_out, bd.to_json().dump(2) + "\n");
        std::printf("wrote %s\n", json_out.c_str());
    }
    return 0;
}

// --------------------------------------------------------------- eval ----

int cmd_eval(const std::string& ckpt_path, const std::string& batch_path,
             const std::string& plan_path, double alpha, std::uint64_t seed,
             const std::string& json_out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::ifstream in(batch_path);
    if (!in) fail("cannot open '" + batch_path + "'");
    const ValidationBatch batch = batch_from_jsonl(in, batch_path);
    const ReductionPlan plan = plan_from_json(load_json_file(plan_path));
    plan.validate_for_layers(ckpt.config.n_layers);

    const DivergenceOracle oracle(ckpt, batch, seed);
    double total_div = 0.0;
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const double d = oracle.item_divergence(i, plan);
        total_div += d;
        auto& a = acc[batch.items[i].subset];
        a.first += d;
        a.second += 1;
    }
    const double divergence = total_div / static_cast<double>(batch.items.size());

    std::vector<double> deltas;
    json subset_json;
    for (const std::string& name : batch.subsets()) {
        const double score = -(acc[name].first / static_cast<double>(acc[name].second));
        deltas.push_back(score);
        subset_json[name] = score;
        std::printf("subset %-12s score %s\n", name.c_str(), fmt12(score).c_str());
    }
    const double penalty = penalty_score(deltas, alpha);
    std::printf("mean divergence: %s\n", fmt12(divergence).c_str());
    std::printf("penalty score:   %s\n", fmt12(penalty).c_str());

    if (!json_out.empty()) {
        json out{{"subset_scores", subset_json},
                 {"mean_divergence", divergence},
                 {"penalty_score", penalty},
                 {"alpha", alpha},
                 {"plan", plan_to_json(plan)}};
        write_file_atomic(json_out, out.dump(2) + "\n");
        std::printf("wrote %s\n", json_out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"redundancy analysis for a toy multimodal decoder"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a random toy checkpoint");
    ConfigFlags gen_cf;
    gen_cf.attach(gen);
    std::uint64_t gen_seed = 1;
    std::string gen_out = "ckpt";
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--out", gen_out, "output path prefix");

    // gen-batch
    auto* genb = app.add_subcommand("gen-batch", "generate a synthetic validation batch");
    std::uint64_t genb_seed = 1;
    std::size_t genb_items = 12, genb_prefix = 4, genb_visual = 24, genb_suffix = 4,
                genb_vocab = 512;
    std::vector<std::string> genb_subsets = {"alpha", "beta", "gamma"};
    std::string genb_out = "batch.jsonl";
    genb->add_option("--seed", genb_seed, "rng seed");
    genb->add_option("--items", genb_items, "number of items");
    genb->add_option("--prefix", genb_prefix, "text prefix length");
    genb->add_option("--visual", genb_visual, "visual block length");
    genb->add_option("--suffix", genb_suffix, "text suffix length");
    genb->add_option("--vocab", genb_vocab, "vocabulary size");
    genb->add_option("--subsets", genb_subsets, "subset names")->delimiter(',');
    genb->add_option("--out", genb_out, "output JSONL path");

    // rank
    auto* rank = app.add_subcommand("rank", "greedy layer-ranking search");
    std::string rank_ckpt, rank_batch, rank_target = "attention", rank_out = "ranking.json";
    long rank_lp = -1;
    double rank_alpha = 2.0;
    std::uint64_t rank_seed = 1;
    std::size_t rank_threads = 0;
    PlanFlags rank_pf;
    rank->add_option("--ckpt", rank_ckpt, "checkpoint prefix")->required();
    rank->add_option("--batch", rank_batch, "validation batch JSONL")->required();
    rank->add_option("--target", rank_target, "attention | ffn");
    rank->add_option("--lp", rank_lp, "position-ranked tail length (default L/4)");
    rank->add_option("--alpha", rank_alpha, "penalty coefficient");
    rank->add_option("--seed", rank_seed, "rng seed");
    rank->add_option("--threads", rank_threads, "worker threads (0 = auto)");
    rank_pf.attach(rank);
    rank->add_option("--out", rank_out, "output ranking JSON");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "reduction sweep over layer fractions");
    std::string sw_ckpt, sw_batch, sw_rank_attn, sw_rank_ffn, sw_out = "sweep";
    std::vector<std::string> sw_targets;
    std::vector<double> sw_fractions;
    double sw_alpha = 2.0;
    std::uint64_t sw_seed = 1;
    bool sw_emit_plans = false;
    PlanFlags sw_pf;
    sweep->add_option("--ckpt", sw_ckpt, "checkpoint prefix")->required();
    sweep->add_option("--batch", sw_batch, "validation batch JSONL")->required();
    sweep->add_option("--rank-attention", sw_rank_attn, "attention ranking JSON");
    sweep->add_option("--rank-ffn", sw_rank_ffn, "ffn ranking JSON");
    sweep->add_option("--targets", sw_targets, "attention,ffn,both")->delimiter(',');
    sweep->add_option("--fractions", sw_fractions, "layer fractions (default 0..1 by 1/L)")
        ->delimiter(',');
    sweep->add_option("--alpha", sw_alpha, "penalty coefficient");
    sweep->add_option("--seed", sw_seed, "rng seed");
    sweep->add_flag("--emit-plans", sw_emit_plans, "write the plan JSON of every point");
    sw_pf.attach(sweep);
    sweep->add_option("--out-prefix", sw_out, "output prefix for CSV/SVG");

    // flops
    auto* flops = app.add_subcommand("flops", "analytic FLOPs report");
    std::string fl_preset, fl_ckpt, fl_plan, fl_json;
    ConfigFlags fl_cf;
    std::size_t fl_prefix = 4, fl_visual = 24, fl_suffix = 4;
    flops->add_option("--preset", fl_preset, "scenario preset (internvl2-table1)");
    flops->add_option("--ckpt", fl_ckpt, "checkpoint prefix (config source)");
    fl_cf.attach(flops);
    flops->add_option("--plan", fl_plan, "plan JSON path");
    flops->add_option("--text-prefix", fl_prefix, "text prefix length");
    flops->add_option("--visual", fl_visual, "visual block length");
    flops->add_option("--text-suffix", fl_suffix, "text suffix length");
    flops->add_option("--json", fl_json, "write breakdown JSON here");

    // eval
    auto* eval = app.add_subcommand("eval", "score one plan on a batch");
    std::string ev_ckpt, ev_batch, ev_plan, ev_json;
    double ev_alpha = 2.0;
    std::uint64_t ev_seed = 1;
    eval->add_option("--ckpt", ev_ckpt, "checkpoint prefix")->required();
    eval->add_option("--batch", ev_batch, "validation batch JSONL")->required();
    eval->add_option("--plan", ev_plan, "plan JSON path")->required();
    eval->add_option("--alpha", ev_alpha, "penalty coefficient");
    eval->add_option("--seed", ev_seed, "rng seed");
    eval->add_option("--out", ev_json, "write report JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_cf, gen_seed, gen_out);
        if (genb->parsed())
            return cmd_gen_batch(genb_seed, genb_items, genb_prefix, genb_visual,
                                 genb_suffix, genb_vocab, genb_subsets, genb_out);
        if (rank->parsed())
            return cmd_rank(rank_ckpt, rank_batch, rank_target, rank_lp, rank_alpha,
                            rank_pf, rank_seed, rank_threads, rank_out);
        if (sweep->parsed())
            return cmd_sweep(sw_ckpt, sw_batch, sw_rank_attn, sw_rank_ffn, sw_targets,
                             sw_fractions, sw_pf, sw_alpha, sw_seed, sw_out,
                             sw_emit_plans);
        if (flops->parsed())
            return cmd_flops(fl_preset, fl_ckpt, fl_cf, fl_plan, fl_prefix, fl_visual,
                             fl_suffix, fl_json);
        if (eval->parsed())
            return cmd_eval(ev_ckpt, ev_batch, ev_plan, ev_alpha, ev_seed, ev_json);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
