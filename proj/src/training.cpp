#include "treeplan/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace treeplan {

using nlohmann::json;

void TrainConfig::validate() const {
    if (beta <= 0.0) throw ValidationError("train.beta must be > 0");
    if (learning_rate <= 0.0) throw ValidationError("train.learning_rate must be > 0");
    if (epochs_sft < 1) throw ValidationError("train.epochs_sft must be >= 1");
    if (epochs_dpo < 1) throw ValidationError("train.epochs_dpo must be >= 1");
    if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
    if (grad_clip <= 0.0) throw ValidationError("train.grad_clip must be > 0");
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"beta", c.beta},
                {"learning_rate", c.learning_rate},
                {"epochs_sft", c.epochs_sft},
                {"epochs_dpo", c.epochs_dpo},
                {"batch_size", c.batch_size},
                {"grad_clip", c.grad_clip},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.beta = j.value("beta", c.beta);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs_sft = j.value("epochs_sft", c.epochs_sft);
    c.epochs_dpo = j.value("epochs_dpo", c.epochs_dpo);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace {

AgentState state_from_history(const std::string& instruction,
                              const std::vector<std::pair<std::string, std::string>>& steps) {
    AgentState s;
    s.instruction = instruction;
    for (const auto& [action_text, summary] : steps) {
        auto a = Action::parse(action_text);
        if (!a) throw DataError("unparseable action in history: " + action_text);
        s.history.push_back({*a, summary});
    }
    return s;
}

std::vector<Action> parse_candidates(const std::vector<std::string>& texts,
                                     const std::string& where) {
    std::vector<Action> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto a = Action::parse(t);
        if (!a) throw DataError(where + ": unparseable candidate " + t);
        out.push_back(*a);
    }
    return out;
}

std::vector<double> candidate_logits(const PolicyParams& params,
                                     const std::vector<std::vector<uint32_t>>& cand_feats) {
    std::vector<double> logits(cand_feats.size());
    for (size_t i = 0; i < cand_feats.size(); i++) {
        double dot = 0.0;
        for (uint32_t f : cand_feats[i]) dot += params.weight(f);
        logits[i] = dot;
    }
    return logits;
}

double log_sigmoid(double x) {
    // -log(1 + e^{-x}), stable on both tails
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sft_item_loss(const PolicyParams& params, const SftItem& item) {
    double total = 0.0;
    for (const auto& step : item.steps) {
        const auto logits = candidate_logits(params, step.cand_feats);
        const auto probs = softmax(logits);
        total -= std::log(probs[step.action_index]);
    }
    return total;
}

/// grad of the per-trajectory NLL: sum_t E_pi[phi] - phi(a_t)
void sft_item_grad(const PolicyParams& params, const SftItem& item, std::vector<double>& grad) {
    for (const auto& step : item.steps) {
        const auto logits = candidate_logits(params, step.cand_feats);
        const auto probs = softmax(logits);
        for (size_t c = 0; c < step.cand_feats.size(); c++) {
            for (uint32_t f : step.cand_feats[c]) grad[f] += probs[c];
        }
        for (uint32_t f : step.cand_feats[step.action_index]) grad[f] -= 1.0;
    }
}

double dpo_item_margin(const PolicyParams& params, const PolicyParams& ref, const DpoItem& item,
                       double beta) {
    const auto logits = candidate_logits(params, item.cand_feats);
    const auto ref_logits = candidate_logits(ref, item.cand_feats);
    const auto lp = softmax(logits);
    const auto ref_lp = softmax(ref_logits);
    const double gap_w = std::log(lp[item.winner_index]) - std::log(ref_lp[item.winner_index]);
    const double gap_l = std::log(lp[item.loser_index]) - std::log(ref_lp[item.loser_index]);
    return beta * (gap_w - gap_l);
}

/// grad of -log sigmoid(margin): (sigmoid(margin) - 1) * beta * (phi_w - phi_l)
void dpo_item_grad(const PolicyParams& params, const PolicyParams& ref, const DpoItem& item,
                   double beta, std::vector<double>& grad) {
    const double margin = dpo_item_margin(params, ref, item, beta);
    const double scale = (sigmoid(margin) - 1.0) * beta;
    for (uint32_t f : item.cand_feats[item.winner_index]) grad[f] += scale;
    for (uint32_t f : item.cand_feats[item.loser_index]) grad[f] -= scale;
}

}  // namespace

std::vector<SftItem> compile_sft(FeatureSpace& space, std::span<const Trajectory> trajectories) {
    std::vector<SftItem> items;
    items.reserve(trajectories.size());
    for (size_t ti = 0; ti < trajectories.size(); ti++) {
        const Trajectory& t = trajectories[ti];
        SftItem item;
        std::vector<std::pair<std::string, std::string>> history;
        for (size_t si = 0; si < t.steps.size(); si++) {
            const TrajectoryStep& step = t.steps[si];
            const std::string where =
                "trajectory " + std::to_string(ti) + " step " + std::to_string(si + 1);
            const AgentState s = state_from_history(t.instruction, history);
            const auto candidates = parse_candidates(step.candidates, where);

            SftItem::Step compiled;
            bool found = false;
            std::vector<uint32_t> feats;
            for (size_t c = 0; c < candidates.size(); c++) {
                featurize(space, s, candidates[c], feats);
                compiled.cand_feats.push_back(feats);
                if (candidates[c].text() == step.action) {
                    compiled.action_index = c;
                    found = true;
                }
            }
            if (!found)
                throw DataError(where + ": action " + step.action +
                                " not in recorded candidate set");
            item.steps.push_back(std::move(compiled));
            history.emplace_back(step.action, step.summary);
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<DpoItem> compile_dpo(FeatureSpace& space, std::span<const PreferencePair> pairs) {
    std::vector<DpoItem> items;
    items.reserve(pairs.size());
    for (size_t pi = 0; pi < pairs.size(); pi++) {
        const PreferencePair& p = pairs[pi];
        const std::string where = "preference pair " + std::to_string(pi);
        std::vector<std::pair<std::string, std::string>> history;
        for (const auto& a : p.history) history.emplace_back(a, "");
        const AgentState s = state_from_history(p.instruction, history);
        const auto candidates = parse_candidates(p.candidates, where);

        DpoItem item;
        bool found_w = false;
        bool found_l = false;
        std::vector<uint32_t> feats;
        for (size_t c = 0; c < candidates.size(); c++) {
            featurize(space, s, candidates[c], feats);
            item.cand_feats.push_back(feats);
            if (candidates[c].text() == p.winner) {
                item.winner_index = c;
                found_w = true;
            }
            if (candidates[c].text() == p.loser) {
                item.loser_index = c;
                found_l = true;
            }
        }
        if (!found_w || !found_l)
            throw DataError(where + ": winner or loser not in recorded candidate set");
        items.push_back(std::move(item));
    }
    return items;
}

double sft_loss(const PolicyParams& params, std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw ValidationError("sft_loss: empty data");
    auto items = compile_sft(*params.space, trajectories);
    double total = 0.0;
    for (const auto& item : items) total += sft_item_loss(params, item);
    return total / static_cast<double>(items.size());
}

std::vector<double> sft_grad(const PolicyParams& params,
                             std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw ValidationError("sft_grad: empty data");
    auto items = compile_sft(*params.space, trajectories);
    std::vector<double> grad(params.space->size(), 0.0);
    for (const auto& item : items) sft_item_grad(params, item, grad);
    for (double& g : grad) g /= static_cast<double>(items.size());
    return grad;
}

double dpo_loss(const PolicyParams& params, const PolicyParams& ref,
                std::span<const PreferencePair> pairs, double beta) {
    if (pairs.empty()) throw ValidationError("dpo_loss: empty data");
    auto items = compile_dpo(*params.space, pairs);
    double total = 0.0;
    for (const auto& item : items) {
        total -= log_sigmoid(dpo_item_margin(params, ref, item, beta));
    }
    return total / static_cast<double>(items.size());
}

std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& ref,
                             std::span<const PreferencePair> pairs, double beta) {
    if (pairs.empty()) throw ValidationError("dpo_grad: empty data");
    auto items = compile_dpo(*params.space, pairs);
    std::vector<double> grad(params.space->size(), 0.0);
    for (const auto& item : items) dpo_item_grad(params, ref, item, beta, grad);
    for (double& g : grad) g /= static_cast<double>(items.size());
    return grad;
}

PhaseResult train_phase(PolicyParams params, std::span<const Trajectory> trajectories,
                        std::span<const PreferencePair> pairs, const TrainConfig& config,
                        LossKind kind, const PolicyParams* ref) {
    config.validate();
    if (kind == LossKind::Dpo && ref == nullptr)
        throw ValidationError("train_phase: DPO needs a reference policy");
    if (kind == LossKind::Sft && trajectories.empty())
        throw ValidationError("train_phase: empty trajectory data");
    if (kind == LossKind::Dpo && pairs.empty())
        throw ValidationError("train_phase: empty preference data");

    std::vector<SftItem> sft_items;
    std::vector<DpoItem> dpo_items;
    size_t item_count;
    if (kind == LossKind::Sft) {
        sft_items = compile_sft(*params.space, trajectories);
        item_count = sft_items.size();
    } else {
        dpo_items = compile_dpo(*params.space, pairs);
        item_count = dpo_items.size();
    }
    params.sync_dimension();

    const int epochs = kind == LossKind::Sft ? config.epochs_sft : config.epochs_dpo;
    const size_t dim = params.weights.size();
    Rng rng(config.seed ^ (kind == LossKind::Sft ? 0x5f7u : 0xd90u));

    auto full_loss = [&]() {
        double total = 0.0;
        if (kind == LossKind::Sft) {
            for (const auto& item : sft_items) total += sft_item_loss(params, item);
        } else {
            for (const auto& item : dpo_items)
                total -= log_sigmoid(dpo_item_margin(params, *ref, item, config.beta));
        }
        return total / static_cast<double>(item_count);
    };

    PhaseResult result;
    std::vector<size_t> order(item_count);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(dim);

    for (int epoch = 0; epoch < epochs; epoch++) {
        Rng epoch_rng = rng.fork(static_cast<uint64_t>(epoch));
        epoch_rng.shuffle(order);
        for (size_t start = 0; start < item_count; start += static_cast<size_t>(config.batch_size)) {
            const size_t stop = std::min(item_count, start + static_cast<size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (size_t i = start; i < stop; i++) {
                if (kind == LossKind::Sft)
                    sft_item_grad(params, sft_items[order[i]], grad);
                else
                    dpo_item_grad(params, *ref, dpo_items[order[i]], config.beta, grad);
            }
            const double batch = static_cast<double>(stop - start);
            double norm_sq = 0.0;
            for (double& g : grad) {
                g /= batch;
                norm_sq += g * g;
            }
            const double norm = std::sqrt(norm_sq);
            const double scale = norm > config.grad_clip ? config.grad_clip / norm : 1.0;
            for (size_t d = 0; d < dim; d++) {
                params.weights[d] -= config.learning_rate * scale * grad[d];
            }
        }
        const double loss = full_loss();
        if (!std::isfinite(loss))
            throw RuntimeError("train_phase: non-finite loss at epoch " + std::to_string(epoch) +
                               " (lr " + std::to_string(config.learning_rate) + ", " +
                               std::to_string(item_count) + " items)");
        result.epoch_losses.push_back(loss);
    }
    result.params = std::move(params);
    return result;
}

PolicyParams warmup_expert(PolicyParams params, const std::vector<Trajectory>& expert,
                           const TrainConfig& config, std::vector<double>* curve) {
    std::vector<Trajectory> filtered;
    for (const auto& t : expert) {
        if (t.source == "expert") filtered.push_back(t);
    }
    if (filtered.empty()) {
        std::cerr << "[treeplan] warmup: no expert trajectories, parameters unchanged\n";
        return params;
    }
    PhaseResult r = train_phase(std::move(params), filtered, {}, config, LossKind::Sft);
    if (curve) *curve = r.epoch_losses;
    return std::move(r.params);
}

EvalEpisode run_greedy_episode(Env& env, const TaskSpec& spec, const PolicyParams& params,
                               const Summarizer& summarizer) {
    StepResult res = env.reset(spec);
    AgentState s = init_state(spec.instruction, res.obs);
    EvalEpisode ep;
    ep.task = spec;
    while (!res.terminal && !res.candidates.empty()) {
        const Action a = greedy_action(params, s, res.candidates);
        StepResult next = env.step(a);
        s = advance(s, a, next.obs, summarizer);
        ep.steps++;
        res = std::move(next);
    }
    const Outcome out = res.terminal ? *res.outcome : env.evaluate_outcome();
    ep.steps = out.steps_used;
    ep.reward = outcome_reward(out);
    ep.success = out.status == TaskStatus::Completed;
    return ep;
}

EvalEpisode run_search_episode(Env& env, const TaskSpec& spec, const PolicyParams& params,
                               Critic& critic, const SearchConfig& search,
                               const Summarizer& summarizer) {
    StepResult res = env.reset(spec);
    AgentState s = init_state(spec.instruction, res.obs);
    EnvSnapshot live = env.snapshot();
    EvalEpisode ep;
    ep.task = spec;
    FeaturizedPolicy policy(params);

    // Search a shadow session rooted at the live state, then play the chosen
    // action in the real episode.
    while (!res.terminal && !res.candidates.empty()) {
        SearchRoot root{s, res.candidates, false, std::nullopt};
        auto shadow = env.clone();
        shadow->restore(live);
        SearchTree tree =
            run_search_rooted(spec, root, policy, critic, *shadow, search, summarizer);
        const Action a =
            tree.root().edges.empty() ? res.candidates.front() : best_root_action(tree);
        StepResult next = env.step(a);
        s = advance(s, a, next.obs, summarizer);
        live = env.snapshot();
        res = std::move(next);
    }
    const Outcome out = res.terminal ? *res.outcome : env.evaluate_outcome();
    ep.steps = out.steps_used;
    ep.reward = outcome_reward(out);
    ep.success = out.status == TaskStatus::Completed;
    return ep;
}

json IterationReport::to_json() const {
    return json{{"iteration", iteration},
                {"new_trajectories", new_trajectories},
                {"new_pairs", new_pairs},
                {"buffer_size", buffer_size},
                {"pair_count", pair_count},
                {"mean_sft_loss", mean_sft_loss},
                {"mean_dpo_loss", mean_dpo_loss},
                {"eval_success", eval_success},
                {"eval_mean_steps", eval_mean_steps},
                {"no_op", no_op}};
}

IterationResult run_iteration(PolicyParams params, const std::vector<TaskSpec>& train_tasks,
                              const std::vector<TaskSpec>& eval_tasks, Env& env, Critic& critic,
                              const IterationConfig& cfg, std::vector<Trajectory> carry_buffer,
                              std::vector<PreferencePair> carry_pairs, int iteration_index) {
    if (train_tasks.empty()) throw ValidationError("run_iteration: empty task suite");

    IterationResult result;
    IterationReport& report = result.report;
    report.iteration = iteration_index;

    // Phase 1: data generation
    std::vector<Trajectory> fresh_trajectories;
    std::vector<PreferencePair> fresh_pairs;
    {
        FeaturizedPolicy policy(params);
        for (size_t ti = 0; ti < train_tasks.size(); ti++) {
            SearchConfig search = cfg.search;
            search.seed = hash128(std::to_string(cfg.search.seed) + "|" +
                                  std::to_string(iteration_index) + "|" + std::to_string(ti))
                              .lo;
            auto session = env.clone();
            SearchTree tree = run_search(train_tasks[ti], policy, critic, *session, search);
            const json dump = tree_to_json(tree, cfg.tpl);
            for (auto& t : extract_success(dump)) fresh_trajectories.push_back(std::move(t));
            for (auto& p :
                 extract_preferences(dump, cfg.pref_epsilon, cfg.pref_n_min, cfg.pair_cap_per_node))
                fresh_pairs.push_back(std::move(p));
        }
    }
    report.new_trajectories = fresh_trajectories.size();
    report.new_pairs = fresh_pairs.size();

    result.buffer = merge_buffers(carry_buffer, fresh_trajectories, cfg.buffer_cap);
    result.pairs = merge_pairs(carry_pairs, fresh_pairs, cfg.buffer_cap);
    report.buffer_size = result.buffer.size();
    report.pair_count = result.pairs.size();

    const bool do_sft = !cfg.skip_sft && !result.buffer.empty();
    const bool do_dpo = !cfg.skip_dpo && !result.pairs.empty();
    if (result.buffer.empty() && result.pairs.empty()) {
        std::cerr << "[treeplan] iteration " << iteration_index
                  << ": no data collected, parameters unchanged\n";
        report.no_op = true;
    }

    // Phase 2: success-trajectory SFT
    if (do_sft) {
        PhaseResult r = train_phase(std::move(params), result.buffer, {}, cfg.train, LossKind::Sft);
        params = std::move(r.params);
        report.mean_sft_loss = r.epoch_losses.back();
    }

    // Phase 3: DPO against the post-SFT snapshot
    if (do_dpo) {
        const PolicyParams reference = params;
        PhaseResult r = train_phase(std::move(params), {}, result.pairs, cfg.train, LossKind::Dpo,
                                    &reference);
        params = std::move(r.params);
        report.mean_dpo_loss = r.epoch_losses.back();
    }

    // Held-out greedy evaluation
    if (!eval_tasks.empty()) {
        double successes = 0.0;
        double steps = 0.0;
        for (const auto& task : eval_tasks) {
            auto session = env.clone();
            EvalEpisode ep = run_greedy_episode(*session, task, params);
            successes += ep.success ? 1.0 : 0.0;
            steps += ep.steps;
        }
        report.eval_success = successes / static_cast<double>(eval_tasks.size());
        report.eval_mean_steps = steps / static_cast<double>(eval_tasks.size());
    }

    result.params = std::move(params);
    return result;
}

}  // namespace treeplan
