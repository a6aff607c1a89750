// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// Greedy layer-ranking search: each round evaluates every still-unranked
// layer on top of the layers ranked so far and appends the best scorer.
// Scores come from a pluggable oracle; the built-in one measures output
// divergence between the reduced and the unreduced model on a validation
// batch.

#ifndef LENS_RANKER_HPP
#define LENS_RANKER_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lens/checkpoint_io.hpp"
#include "lens/model.hpp"
#include "lens/plan.hpp"

namespace lens {

enum class Target { attention, ffn };

inline Target parse_target(const std::string& s) {
    if (s == "attention") return Target::attention;
    if (s == "ffn") return Target::ffn;
    fail("unknown target '" + s + "' (expected attention or ffn)");
}

inline std::string to_string(Target t) {
    return t == Target::attention ? "attention" : "ffn";
}

struct BatchItem {
    std::vector<std::uint32_t> ids;
    TokenLayout layout;
    std::string subset;
};

struct ValidationBatch {
    std::vector<BatchItem> items;

    /// Subset tags in first-appearance order (deterministic aggregation).
    std::vector<std::string> subsets() const {
        std::vector<std::string> out;
        for (const BatchItem& it : items)
            if (std::find(out.begin(), out.end(), it.subset) == out.end())
                out.push_back(it.subset);
        return out;
    }

    void validate(std::size_t vocab_size) const {
        if (items.empty()) fail("batch: no items");
        for (std::size_t i = 0; i < items.size(); ++i) {
            const BatchItem& it = items[i];
            if (it.ids.size() != it.layout.size() || it.ids.empty())
                fail("batch item " + std::to_string(i) +
                     ": ids and tags must be nonempty and equal length");
            for (std::uint32_t id : it.ids)
                if (id >= vocab_size)
                    fail("batch item " + std::to_string(i) + ": token id " +
                         std::to_string(id) + " out of range for vocab " +
                         std::to_string(vocab_size));
        }
    }
};

/// One record per line: {"ids": [...], "tags": ["T"|"V", ...], "subset": "..."}.
inline ValidationBatch batch_from_jsonl(std::istream& in, const std::string& origin) {
    ValidationBatch batch;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
            BatchItem item;
            for (const auto& v : j.at("ids")) item.ids.push_back(v.get<std::uint32_t>());
            std::string tags;
            for (const auto& v : j.at("tags")) tags += v.get<std::string>();
            item.layout = TokenLayout::from_string(tags);
            item.subset = j.at("subset").get<std::string>();
            batch.items.push_back(std::move(item));
        } catch (const json::exception& e) {
            fail(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (batch.items.empty()) fail(origin + ": batch is empty");
    return batch;
}

inline std::string batch_to_jsonl(const ValidationBatch& batch) {
    std::string out;
    for (const BatchItem& it : batch.items) {
        json j;
        j["ids"] = it.ids;
        json tags = json::array();
        for (Token t : it.layout.tags)
            tags.push_back(t == Token::visual ? "V" : "T");
        j["tags"] = std::move(tags);
        j["subset"] = it.subset;
        out += j.dump() + "\n";
    }
    return out;
}

struct SubsetScore {
    std::string subset;
    double score = 0.0;
};

/// Evaluates a reduction plan and returns one score per validation subset
/// (higher is better).
using PlanOracle = std::function<std::vector<SubsetScore>(const ReductionPlan&)>;

enum class OracleKind { divergence, plugin };

struct ScoreConfig {
    double alpha = 2.0;  // negative per-subset deltas are multiplied by alpha
    OracleKind oracle_kind = OracleKind::divergence;

    void validate() const {
        if (alpha < 1.0) fail("score config: alpha must be >= 1");
    }
};

/// Sum of per-subset score deltas with drops amplified: positive deltas
/// count once, negative deltas are multiplied by alpha.
inline double penalty_score(const std::vector<double>& deltas, double alpha) {
    if (alpha < 1.0) fail("penalty_score: alpha must be >= 1");
    double total = 0.0;
    for (double d : deltas) total += d >= 0.0 ? d : alpha * d;
    return total;
}

namespace detail {

inline Vec log_softmax_row(const double* row, std::size_t n) {
    double mx = row[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(row[i] - mx);
    const double lse = mx + std::log(sum);
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = row[i] - lse;
    return out;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    if (workers == 0) {
        workers = std::thread::hardware_concurrency();
        if (workers == 0) workers = 1;
    }
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (std::thread& t : pool) t.join();
}

}  // namespace detail

/// Score oracle backed by output divergence: for every item, the mean KL
/// divergence from the unreduced model's next-token distributions to the
/// reduced model's, measured at text positions only. A subset's score is
/// minus the mean divergence over its items, so the unreduced model scores
/// exactly zero.
class DivergenceOracle {
public:
    DivergenceOracle(const Checkpoint& ckpt, const ValidationBatch& batch,
                     std::uint64_t seed)
        : ckpt_(ckpt), batch_(batch), seed_(seed) {
        batch.validate(ckpt.config.vocab_size);
        full_text_logprobs_.resize(batch.items.size());
        text_positions_.resize(batch.items.size());
        for (std::size_t i = 0; i < batch.items.size(); ++i) {
            const BatchItem& item = batch.items[i];
            const ForwardResult full =
                forward(ckpt, item.ids, item.layout, nullptr, item_seed(i));
            text_positions_[i] = item.layout.text_positions();
            for (std::size_t p : text_positions_[i])
                full_text_logprobs_[i].push_back(detail::log_softmax_row(
                    full.logits.row(p), full.logits.cols));
        }
    }

    std::uint64_t item_seed(std::size_t index) const {
        return splitmix64(splitmix64(seed_) ^ index);
    }

    /// Mean divergence of one item under a plan.
    double item_divergence(std::size_t i, const ReductionPlan& plan) const {
        const BatchItem& item = batch_.items[i];
        const ForwardResult red =
            forward(ckpt_, item.ids, item.layout, &plan, item_seed(i));
        const std::vector<std::size_t>& text = text_positions_[i];
        if (text.empty()) return 0.0;

        std::map<std::size_t, std::size_t> row_of;
        for (std::size_t r = 0; r < red.positions.size(); ++r)
            row_of[red.positions[r]] = r;

        double total = 0.0;
        for (std::size_t t = 0; t < text.size(); ++t) {
            const auto it = row_of.find(text[t]);
            if (it == row_of.end())
                fail("divergence oracle: text position was pruned");
            const Vec lsq = detail::log_softmax_row(red.logits.row(it->second),
                                                    red.logits.cols);
            const Vec& lsp = full_text_logprobs_[i][t];
            double kl = 0.0;
            for (std::size_t v = 0; v < lsp.size(); ++v)
                kl += std::exp(lsp[v]) * (lsp[v] - lsq[v]);
            total += kl;
        }
        return total / static_cast<double>(text.size());
    }

    std::vector<SubsetScore> operator()(const ReductionPlan& plan) const {
        const std::vector<std::string> names = batch_.subsets();
        std::map<std::string, std::pair<double, std::size_t>> acc;
        for (std::size_t i = 0; i < batch_.items.size(); ++i) {
            auto& a = acc[batch_.items[i].subset];
            a.first += item_divergence(i, plan);
            a.second += 1;
        }
        std::vector<SubsetScore> out;
        for (const std::string& name : names) {
            const auto& a = acc[name];
            out.push_back({name, -(a.first / static_cast<double>(a.second))});
        }
        return out;
    }

    const ValidationBatch& batch() const { return batch_; }

private:
    const Checkpoint& ckpt_;
    const ValidationBatch& batch_;
    std::uint64_t seed_;
    std::vector<std::vector<Vec>> full_text_logprobs_;
    std::vector<std::vector<std::size_t>> text_positions_;
};

struct EvalEntry {
    std::vector<std::size_t> layers;  // the full layer set the plan applied
    double score = 0.0;
};

struct RankingResult {
    Target target = Target::attention;
    std::vector<std::size_t> ranked;  // highest redundancy first
    std::size_t l_p = 0;              // length of the position-ranked tail
    std::vector<EvalEntry> eval_log;
    ReductionPlan search_plan;  // template the candidates were evaluated with
};

/// Thrown when the oracle fails mid-search; carries the evaluations that
/// completed before the failure.
struct SearchAborted : Error {
    RankingResult partial;
    SearchAborted(const std::string& msg, RankingResult p)
        : Error(msg), partial(std::move(p)) {}
};

struct SearchOptions {
    std::size_t workers = 0;  // 0 = one per hardware thread
};

namespace detail {

inline ReductionPlan candidate_plan(const ReductionPlan& tmpl, Target target,
                                    const std::set<std::size_t>& layers) {
    ReductionPlan p = tmpl;
    p.probe_fraction = 1.0;  // search-time: probe the whole scope
    if (target == Target::attention) p.attn_layers = layers;
    else p.ffn_layers = layers;
    return p;
}

}  // namespace detail

/// Greedy search over `search_space`, with `pre_ranked` layers already
/// applied (and already occupying the front of the ranking). Every
/// candidate round evaluates each unranked layer once, so the search costs
/// s(s+1)/2 oracle calls for s = |search_space|. Ties break toward the
/// lower layer index. Candidate evaluations may run in parallel; the
/// winner is picked by an ordered reduction, so results do not depend on
/// scheduling.
inline RankingResult rank_layers_with_oracle(
    const PlanOracle& oracle, Target target,
    const std::vector<std::size_t>& search_space,
    const std::vector<std::size_t>& pre_ranked, const ReductionPlan& plan_template,
    const ScoreConfig& score_cfg, const SearchOptions& opts = {}) {
    score_cfg.validate();

    RankingResult res;
    res.target = target;
    res.l_p = pre_ranked.size();
    res.ranked = pre_ranked;
    res.search_plan = detail::candidate_plan(plan_template, target, {});
    if (search_space.empty()) return res;

    // Baseline subset scores; deltas are measured against the unreduced
    // model (a no-op plan).
    ReductionPlan noop = plan_template;
    noop.attn_layers.clear();
    noop.ffn_layers.clear();
    noop.pruning.reset();
    const std::vector<SubsetScore> baseline = oracle(noop);

    auto scalar_score = [&](const std::vector<SubsetScore>& scores) {
        std::map<std::string, double> by_name;
        for (const SubsetScore& s : scores) by_name[s.subset] = s.score;
        std::vector<double> deltas;
        deltas.reserve(baseline.size());
        for (const SubsetScore& b : baseline) {
            const auto it = by_name.find(b.subset);
            if (it == by_name.end())
                fail("oracle dropped subset '" + b.subset + "'");
            deltas.push_back(it->second - b.score);
        }
        return penalty_score(deltas, score_cfg.alpha);
    };

    std::set<std::size_t> applied(pre_ranked.begin(), pre_ranked.end());
    std::vector<std::size_t> unranked = search_space;
    std::sort(unranked.begin(), unranked.end());

    while (!unranked.empty()) {
        std::vector<double> scores(unranked.size());
        std::vector<std::exception_ptr> errors(unranked.size());
        detail::parallel_for(unranked.size(), opts.workers, [&](std::size_t i) {
            try {
                std::set<std::size_t> layers = applied;
                layers.insert(unranked[i]);
                scores[i] =
                    scalar_score(oracle(detail::candidate_plan(plan_template, target, layers)));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });

        std::size_t best = unranked.size();
        for (std::size_t i = 0; i < unranked.size(); ++i) {
            if (errors[i]) {
                std::string msg = "oracle failed while evaluating layer " +
                                  std::to_string(unranked[i]);
                try {
                    std::rethrow_exception(errors[i]);
                } catch (const std::exception& e) {
                    msg += std::string(": ") + e.what();
                } catch (...) {}
                throw SearchAborted(msg, std::move(res));
            }
            std::set<std::size_t> layers = applied;
            layers.insert(unranked[i]);
            res.eval_log.push_back(
                {std::vector<std::size_t>(layers.begin(), layers.end()), scores[i]});
            if (best == unranked.size() || scores[i] > scores[best]) best = i;
        }

        const std::size_t winner = unranked[best];
        res.ranked.push_back(winner);
        applied.insert(winner);
        unranked.erase(unranked.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return res;
}

/// Hybrid strategy: the last l_p layers are pre-ranked by position (deepest
/// first) and stay applied during the search that orders the remaining
/// layers. l_p = 0 is the pure search; l_p = n_layers the pure
/// position-based ranking (no oracle calls).
inline RankingResult hybrid_ranking_with_oracle(
    const PlanOracle& oracle, Target target, std::size_t n_layers, std::size_t l_p,
    const ReductionPlan& plan_template, const ScoreConfig& score_cfg,
    const SearchOptions& opts = {}) {
    if (l_p > n_layers) fail("hybrid ranking: L_p exceeds layer count");
    std::vector<std::size_t> pre;
    for (std::size_t i = 0; i < l_p; ++i) pre.push_back(n_layers - 1 - i);
    std::vector<std::size_t> space;
    for (std::size_t i = 0; i + l_p < n_layers; ++i) space.push_back(i);
    return rank_layers_with_oracle(oracle, target, space, pre, plan_template,
                                   score_cfg, opts);
}

/// Divergence-oracle front ends.
inline RankingResult rank_layers(const Checkpoint& ckpt, const ValidationBatch& batch,
                                 Target target, const std::vector<std::size_t>& search_space,
                                 const ReductionPlan& plan_template,
                                 const ScoreConfig& score_cfg, std::uint64_t seed,
                                 const SearchOptions& opts = {}) {
    const DivergenceOracle oracle(ckpt, batch, seed);
    return rank_layers_with_oracle(std::cref(oracle), target, search_space, {},
                                   plan_template, score_cfg, opts);
}

inline RankingResult hybrid_ranking(const Checkpoint& ckpt, const ValidationBatch& batch,
                                    Target target, std::size_t l_p,
                                    const ReductionPlan& plan_template,
                                    const ScoreConfig& score_cfg, std::uint64_t seed,
                                    const SearchOptions& opts = {}) {
    const DivergenceOracle oracle(ckpt, batch, seed);
    return hybrid_ranking_with_oracle(std::cref(oracle), target, ckpt.config.n_layers,
                                      l_p, plan_template, score_cfg, opts);
}

/// Materializes the top round(p * L) layers of each ranking into a plan.
inline ReductionPlan plan_for_fraction(const RankingResult* attention_ranking,
                                       const RankingResult* ffn_ranking, double fraction,
                                       const ReductionPlan& plan_template,
                                       std::size_t n_layers) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        fail("plan_for_fraction: fraction must be in [0, 1]");
    const auto count = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n_layers)));
    ReductionPlan plan = plan_template;
    plan.attn_layers.clear();
    plan.ffn_layers.clear();
    auto take = [&](const RankingResult& r, std::set<std::size_t>& into) {
        if (count > r.ranked.size())
            fail("plan_for_fraction: ranking covers only " +
                 std::to_string(r.ranked.size()) + " layers, need " +
                 std::to_string(count));
        for (std::size_t i = 0; i < count; ++i) into.insert(r.ranked[i]);
    };
    if (attention_ranking) take(*attention_ranking, plan.attn_layers);
    if (ffn_ranking) take(*ffn_ranking, plan.ffn_layers);
    return plan;
}

inline json ranking_to_json(const RankingResult& r) {
    json evals = json::array();
    for (const EvalEntry& e : r.eval_log)
        evals.push_back({{"layers", e.layers}, {"score", e.score}});
    return json{{"target", to_string(r.target)},
                {"ranked", r.ranked},
                {"L_p", r.l_p},
                {"eval_log", std::move(evals)},
                {"search_plan", plan_to_json(r.search_plan)}};
}

inline RankingResult ranking_from_json(const json& j) {
    RankingResult r;
    try {
        r.target = parse_target(j.at("target").get<std::string>());
        for (const auto& v : j.at("ranked")) r.ranked.push_back(v.get<std::size_t>());
        r.l_p = j.at("L_p").get<std::size_t>();
        for (const auto& e : j.at("eval_log")) {
            EvalEntry entry;
            for (const auto& v : e.at("layers"))
                entry.layers.push_back(v.get<std::size_t>());
            entry.score = e.at("score").get<double>();
            r.eval_log.push_back(std::move(entry));
        }
        if (j.contains("search_plan"))
            r.search_plan = plan_from_json(j.at("search_plan"));
    } catch (const json::exception& e) {
        fail(std::string("ranking: malformed JSON: ") + e.what());
    }
    return r;
}

}  // namespace lens

#endif  // LENS_RANKER_HPP
