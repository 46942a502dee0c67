#include "trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace microturn::train {

using codec::EncodedHistory;
using codec::Vocabulary;
using nets::GruNet;
using rollout::RolloutBatch;
using rollout::Trajectory;

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::PPO: return "ppo";
        case Algorithm::RLOO: return "rloo";
        case Algorithm::GRPO: return "grpo";
        case Algorithm::SFT: return "sft";
    }
    return "ppo";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "ppo") return Algorithm::PPO;
    if (s == "rloo") return Algorithm::RLOO;
    if (s == "grpo") return Algorithm::GRPO;
    if (s == "sft") return Algorithm::SFT;
    throw std::invalid_argument("unknown algorithm: " + s);
}

void TrainConfig::validate() const {
    if (clip_eps <= 0) throw std::invalid_argument("clip_eps must be > 0");
    if (actor_lr <= 0 || critic_lr <= 0 || sft_lr <= 0) {
        throw std::invalid_argument("learning rates must be positive");
    }
    if (temperature <= 0) throw std::invalid_argument("temperature must be > 0");
    if (batch_size < 1 || epochs < 0) throw std::invalid_argument("bad batch/epochs");
    if ((algorithm == Algorithm::RLOO || algorithm == Algorithm::GRPO) && group_size < 2) {
        throw std::invalid_argument("rloo/grpo need group_size >= 2");
    }
    if (group_size < 1 || batch_size % group_size != 0) {
        throw std::invalid_argument("batch_size must be a multiple of group_size");
    }
    if (minibatch_size < 1 || sft_minibatch < 1) {
        throw std::invalid_argument("minibatch sizes must be >= 1");
    }
    if (ppo_update_epochs < 1) throw std::invalid_argument("ppo_update_epochs must be >= 1");
    if (d_embed < 1 || d_hidden < 1) throw std::invalid_argument("bad net dimensions");
    if (max_action_tokens < 2) throw std::invalid_argument("max_action_tokens must be >= 2");
    if (max_context < 16) throw std::invalid_argument("max_context too small");
    if (sft_demos < 0) throw std::invalid_argument("sft_demos must be >= 0");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
}

SurrogateTerm clipped_surrogate(double new_logp, double old_logp, double advantage,
                                double clip_eps) {
    const double ratio = std::exp(new_logp - old_logp);
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    const double unclipped = ratio * advantage;
    const double clipped = clipped_ratio * advantage;
    if (unclipped <= clipped) {
        return {-unclipped, -ratio * advantage};
    }
    return {-clipped, ratio == clipped_ratio ? -ratio * advantage : 0.0};
}

std::vector<double> action_logps(const GruNet& policy, const EncodedHistory& history,
                                 double temperature) {
    const GruNet::Cache cache = policy.forward(history.tokens);
    const int v = policy.out_dim();
    std::vector<double> logps(history.action_positions.size());
    for (size_t j = 0; j < history.action_positions.size(); ++j) {
        const int pos = history.action_positions[j];
        const double* row = cache.outputs.data() + static_cast<size_t>(pos - 1) * v;
        logps[j] = nets::log_softmax_at({row, static_cast<size_t>(v)}, temperature,
                                        history.tokens[pos]);
    }
    return logps;
}

std::vector<double> action_values(const GruNet& value, const EncodedHistory& history) {
    const GruNet::Cache cache = value.forward(history.tokens);
    std::vector<double> out(history.action_positions.size());
    for (size_t j = 0; j < history.action_positions.size(); ++j) {
        out[j] = cache.outputs[history.action_positions[j]];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared per-trajectory gradient machinery
// ---------------------------------------------------------------------------

TrajGradResult policy_objective_grad(const GruNet& policy, const EncodedHistory& history,
                                     double temperature, const TokenObjective& objective,
                                     double entropy_scale) {
    const GruNet::Cache cache = policy.forward(history.tokens);
    const int v = policy.out_dim();
    const int T = cache.length;
    std::vector<double> d_out(static_cast<size_t>(T) * v, 0.0);

    TrajGradResult result;
    double entropy_sum = 0.0;
    for (size_t j = 0; j < history.action_positions.size(); ++j) {
        const int pos = history.action_positions[j];
        const int row_index = pos - 1;
        const double* row = cache.outputs.data() + static_cast<size_t>(row_index) * v;
        const std::span<const double> logits{row, static_cast<size_t>(v)};
        const int token = history.tokens[pos];
        const double new_logp = nets::log_softmax_at(logits, temperature, token);
        const SurrogateTerm term = objective(static_cast<int>(j), new_logp);
        result.loss += term.loss;

        const std::vector<double> probs = nets::softmax(logits, temperature);
        double* drow = d_out.data() + static_cast<size_t>(row_index) * v;
        for (int i = 0; i < v; ++i) {
            drow[i] += term.dlogp * (((i == token) ? 1.0 : 0.0) - probs[i]) / temperature;
        }
        double h = 0.0;
        for (int i = 0; i < v; ++i) {
            if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
        }
        entropy_sum += h;
        if (entropy_scale != 0.0) {
            result.loss -= entropy_scale * h;
            for (int i = 0; i < v; ++i) {
                const double dh = -probs[i] * (std::log(std::max(probs[i], 1e-300)) + h) /
                                  temperature;
                drow[i] -= entropy_scale * dh;
            }
        }
    }
    result.entropy = history.action_positions.empty()
                         ? 0.0
                         : entropy_sum / static_cast<double>(history.action_positions.size());
    result.grad = policy.backward(cache, d_out);
    return result;
}

std::vector<double> value_objective_grad(const GruNet& value, const EncodedHistory& history,
                                         const std::vector<double>& targets, double scale,
                                         double* loss_out) {
    const GruNet::Cache cache = value.forward(history.tokens);
    const int T = cache.length;
    std::vector<double> d_out(static_cast<size_t>(T), 0.0);
    double loss = 0.0;
    for (size_t j = 0; j < history.action_positions.size(); ++j) {
        const int pos = history.action_positions[j];
        const double diff = cache.outputs[pos] - targets[j];
        loss += diff * diff;
        d_out[pos] = 2.0 * diff * scale;
    }
    if (loss_out) *loss_out = loss;
    return value.backward(cache, d_out);
}

namespace {

void add_into(std::vector<double>& acc, const std::vector<double>& g) {
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

// Per-action-token rewards of a trajectory, in action_positions order.
std::vector<double> action_token_rewards(const Trajectory& t) {
    std::vector<double> out(t.history.action_positions.size());
    for (size_t j = 0; j < out.size(); ++j) {
        out[j] = t.token_rewards[t.history.action_positions[j]];
    }
    return out;
}

std::vector<std::vector<int>> minibatch_plan(int n, int minibatch, Rng& rng) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<int>> plan;
    for (int start = 0; start < n; start += minibatch) {
        const int end = std::min(n, start + minibatch);
        plan.emplace_back(order.begin() + start, order.begin() + end);
    }
    return plan;
}

struct PrepData {
    std::vector<double> ref_logps;
    std::vector<double> kl;       // old - ref, per action token
    std::vector<double> rewards;  // per action token
    std::vector<double> values;
    credit::AdvantageBatch adv;
    double scalar_advantage = 0.0;  // RLOO / GRPO broadcast
    double kl_sum = 0.0;
};

double mean_kl_of(const std::vector<PrepData>& prep) {
    double sum = 0.0;
    long long count = 0;
    for (const PrepData& p : prep) {
        sum += p.kl_sum;
        count += static_cast<long long>(p.kl.size());
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

} // namespace

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

UpdateStats ppo_update(const RolloutBatch& batch, GruNet& policy, GruNet& value,
                       const GruNet& ref, const TrainConfig& cfg,
                       nets::AdamState& actor_optim, nets::AdamState& critic_optim,
                       Rng& update_rng) {
    const auto& trajs = batch.trajectories;
    const int B = static_cast<int>(trajs.size());
    if (B == 0) throw std::invalid_argument("empty rollout batch");
    const double tau = batch.temperature;

    std::vector<PrepData> prep(B);
    rollout::parallel_for(B, cfg.parallelism, [&](int i) {
        PrepData& p = prep[i];
        const Trajectory& t = trajs[i];
        p.ref_logps = action_logps(ref, t.history, tau);
        p.rewards = action_token_rewards(t);
        p.kl.resize(p.ref_logps.size());
        for (size_t j = 0; j < p.kl.size(); ++j) {
            p.kl[j] = t.old_logps[j] - p.ref_logps[j];
            p.kl_sum += p.kl[j];
            if (cfg.kl_mode == KlMode::InReward) {
                p.rewards[j] -= cfg.kl_coef * p.kl[j];
            }
        }
        p.values = action_values(value, t.history);
        p.adv = credit::gae_batch(p.values, p.rewards, cfg.gamma, cfg.lambda);
    });

    UpdateStats stats;
    stats.mean_kl = mean_kl_of(prep);

    bool first_minibatch = true;
    double loss_accum = 0.0, vloss_accum = 0.0, entropy_accum = 0.0;
    int loss_samples = 0;

    for (int pass = 0; pass < cfg.ppo_update_epochs; ++pass) {
        const auto plan = minibatch_plan(B, cfg.minibatch_size, update_rng);
        for (const std::vector<int>& mb : plan) {
            const double inv_b = 1.0 / static_cast<double>(mb.size());
            long long mb_tokens = 0;
            for (int i : mb) mb_tokens += static_cast<long long>(prep[i].adv.advantages.size());
            const double inv_tokens = mb_tokens ? 1.0 / static_cast<double>(mb_tokens) : 0.0;

            // per-minibatch advantage whitening
            double adv_shift = 0.0, adv_scale = 1.0;
            if (cfg.advantage_norm && mb_tokens > 0) {
                double sum = 0.0;
                for (int i : mb) {
                    for (double a : prep[i].adv.advantages) sum += a;
                }
                adv_shift = sum / static_cast<double>(mb_tokens);
                double var = 0.0;
                for (int i : mb) {
                    for (double a : prep[i].adv.advantages) {
                        var += (a - adv_shift) * (a - adv_shift);
                    }
                }
                adv_scale = 1.0 / (std::sqrt(var / static_cast<double>(mb_tokens)) + 1e-8);
            }

            std::vector<TrajGradResult> actor_grads(mb.size());
            std::vector<std::vector<double>> critic_grads(mb.size());
            std::vector<double> critic_losses(mb.size(), 0.0);
            std::vector<double> ratio_devs(mb.size(), 0.0);
            rollout::parallel_for(static_cast<int>(mb.size()), cfg.parallelism, [&](int s) {
                const int i = mb[s];
                const Trajectory& t = trajs[i];
                const PrepData& p = prep[i];
                double dev = 0.0;
                auto objective = [&](int j, double new_logp) {
                    dev = std::max(dev, std::abs(std::exp(new_logp - t.old_logps[j]) - 1.0));
                    const double adv = (p.adv.advantages[j] - adv_shift) * adv_scale;
                    SurrogateTerm term =
                        clipped_surrogate(new_logp, t.old_logps[j], adv, cfg.clip_eps);
                    term.loss *= inv_b;
                    term.dlogp *= inv_b;
                    return term;
                };
                actor_grads[s] = policy_objective_grad(policy, t.history, tau, objective,
                                                  cfg.entropy_coef * inv_b);
                ratio_devs[s] = dev;
                critic_grads[s] = value_objective_grad(value, t.history, p.adv.value_targets,
                                                  inv_tokens, &critic_losses[s]);
            });

            std::vector<double> actor_grad(policy.param_count(), 0.0);
            std::vector<double> critic_grad(value.param_count(), 0.0);
            double mb_loss = 0.0, mb_vloss = 0.0, mb_entropy = 0.0;
            for (size_t s = 0; s < mb.size(); ++s) {
                add_into(actor_grad, actor_grads[s].grad);
                add_into(critic_grad, critic_grads[s]);
                mb_loss += actor_grads[s].loss;
                mb_entropy += actor_grads[s].entropy;
                mb_vloss += critic_losses[s];
                if (first_minibatch) {
                    stats.max_ratio_dev = std::max(stats.max_ratio_dev, ratio_devs[s]);
                }
            }
            first_minibatch = false;
            nets::check_finite(actor_grad, policy, "ppo actor gradient");
            nets::check_finite(critic_grad, value, "ppo critic gradient");
            nets::adam_step(policy.params(), actor_grad, actor_optim);
            nets::adam_step(value.params(), critic_grad, critic_optim);
            ++stats.grad_steps;
            loss_accum += mb_loss;
            vloss_accum += mb_vloss * (mb_tokens ? 1.0 / static_cast<double>(mb_tokens) : 0.0);
            entropy_accum += mb_entropy / static_cast<double>(mb.size());
            ++loss_samples;
        }
    }
    if (loss_samples) {
        stats.policy_loss = loss_accum / loss_samples;
        stats.value_loss = vloss_accum / loss_samples;
        stats.entropy = entropy_accum / loss_samples;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// RLOO
// ---------------------------------------------------------------------------

UpdateStats rloo_update(const RolloutBatch& batch, GruNet& policy, const GruNet& ref,
                        const TrainConfig& cfg, nets::AdamState& actor_optim) {
    const auto& trajs = batch.trajectories;
    const int B = static_cast<int>(trajs.size());
    if (B == 0) throw std::invalid_argument("empty rollout batch");
    const int k = batch.group_size;
    if (k < 2) throw std::invalid_argument("rloo needs groups of at least 2");
    if (B % k != 0) throw std::invalid_argument("batch not divisible into groups");
    const double tau = batch.temperature;

    std::vector<PrepData> prep(B);
    rollout::parallel_for(B, cfg.parallelism, [&](int i) {
        PrepData& p = prep[i];
        const Trajectory& t = trajs[i];
        p.ref_logps = action_logps(ref, t.history, tau);
        p.kl.resize(p.ref_logps.size());
        for (size_t j = 0; j < p.kl.size(); ++j) {
            p.kl[j] = t.old_logps[j] - p.ref_logps[j];
            p.kl_sum += p.kl[j];
        }
    });

    // leave-one-out advantages on KL-penalized discounted returns
    for (int g = 0; g < B / k; ++g) {
        std::vector<double> returns(k);
        for (int j = 0; j < k; ++j) {
            const Trajectory& t = trajs[g * k + j];
            returns[j] = credit::discounted_return(t.turn_rewards, cfg.gamma) -
                         cfg.kl_coef * prep[g * k + j].kl_sum;
        }
        const std::vector<double> adv = credit::rloo_advantages(returns);
        for (int j = 0; j < k; ++j) prep[g * k + j].scalar_advantage = adv[j];
    }

    UpdateStats stats;
    stats.mean_kl = mean_kl_of(prep);

    const double inv_b = 1.0 / static_cast<double>(B);
    std::vector<TrajGradResult> grads(B);
    rollout::parallel_for(B, cfg.parallelism, [&](int i) {
        const double weight = prep[i].scalar_advantage * inv_b;
        auto objective = [&](int, double new_logp) {
            return SurrogateTerm{-weight * new_logp, -weight};
        };
        grads[i] = policy_objective_grad(policy, trajs[i].history, tau, objective,
                                    cfg.entropy_coef * inv_b);
    });
    std::vector<double> grad(policy.param_count(), 0.0);
    for (int i = 0; i < B; ++i) {
        add_into(grad, grads[i].grad);
        stats.policy_loss += grads[i].loss;
        stats.entropy += grads[i].entropy * inv_b;
    }
    nets::check_finite(grad, policy, "rloo gradient");
    nets::adam_step(policy.params(), grad, actor_optim);
    stats.grad_steps = 1;
    return stats;
}

// ---------------------------------------------------------------------------
// GRPO
// ---------------------------------------------------------------------------

UpdateStats grpo_update(const RolloutBatch& batch, GruNet& policy, const GruNet& ref,
                        const TrainConfig& cfg, nets::AdamState& actor_optim,
                        Rng& update_rng) {
    const auto& trajs = batch.trajectories;
    const int B = static_cast<int>(trajs.size());
    if (B == 0) throw std::invalid_argument("empty rollout batch");
    const int k = batch.group_size;
    if (k < 2) throw std::invalid_argument("grpo needs groups of at least 2");
    if (B % k != 0) throw std::invalid_argument("batch not divisible into groups");
    for (const Trajectory& t : trajs) {
        if (t.spec.scheme != world::RewardScheme::Sparse) {
            throw std::invalid_argument(
                "grpo is restricted to the sparse reward scheme (terminal rewards only)");
        }
    }
    const double tau = batch.temperature;

    std::vector<PrepData> prep(B);
    rollout::parallel_for(B, cfg.parallelism, [&](int i) {
        PrepData& p = prep[i];
        const Trajectory& t = trajs[i];
        p.ref_logps = action_logps(ref, t.history, tau);
        p.kl.resize(p.ref_logps.size());
        for (size_t j = 0; j < p.kl.size(); ++j) {
            p.kl[j] = t.old_logps[j] - p.ref_logps[j];
            p.kl_sum += p.kl[j];
        }
    });
    for (int g = 0; g < B / k; ++g) {
        std::vector<double> returns(k);
        for (int j = 0; j < k; ++j) {
            returns[j] = credit::discounted_return(trajs[g * k + j].turn_rewards, cfg.gamma);
        }
        const std::vector<double> adv = credit::grpo_advantages(returns, 1e-8);
        for (int j = 0; j < k; ++j) prep[g * k + j].scalar_advantage = adv[j];
    }

    UpdateStats stats;
    stats.mean_kl = mean_kl_of(prep);

    bool first_minibatch = true;
    double loss_accum = 0.0, entropy_accum = 0.0;
    int loss_samples = 0;
    for (int pass = 0; pass < cfg.ppo_update_epochs; ++pass) {
        const auto plan = minibatch_plan(B, cfg.minibatch_size, update_rng);
        for (const std::vector<int>& mb : plan) {
            const double inv_b = 1.0 / static_cast<double>(mb.size());
            long long mb_tokens = 0;
            for (int i : mb) mb_tokens += static_cast<long long>(prep[i].kl.size());
            const double kl_dlogp =
                mb_tokens ? cfg.kl_coef / static_cast<double>(mb_tokens) : 0.0;

            std::vector<TrajGradResult> grads(mb.size());
            std::vector<double> ratio_devs(mb.size(), 0.0);
            rollout::parallel_for(static_cast<int>(mb.size()), cfg.parallelism, [&](int s) {
                const int i = mb[s];
                const Trajectory& t = trajs[i];
                const PrepData& p = prep[i];
                double dev = 0.0;
                auto objective = [&](int j, double new_logp) {
                    dev = std::max(dev, std::abs(std::exp(new_logp - t.old_logps[j]) - 1.0));
                    SurrogateTerm term = clipped_surrogate(new_logp, t.old_logps[j],
                                                           p.scalar_advantage, cfg.clip_eps);
                    term.loss = term.loss * inv_b + kl_dlogp * (new_logp - p.ref_logps[j]);
                    term.dlogp = term.dlogp * inv_b + kl_dlogp;
                    return term;
                };
                grads[s] = policy_objective_grad(policy, t.history, tau, objective,
                                            cfg.entropy_coef * inv_b);
                ratio_devs[s] = dev;
            });
            std::vector<double> grad(policy.param_count(), 0.0);
            double mb_loss = 0.0, mb_entropy = 0.0;
            for (size_t s = 0; s < mb.size(); ++s) {
                add_into(grad, grads[s].grad);
                mb_loss += grads[s].loss;
                mb_entropy += grads[s].entropy;
                if (first_minibatch) {
                    stats.max_ratio_dev = std::max(stats.max_ratio_dev, ratio_devs[s]);
                }
            }
            first_minibatch = false;
            nets::check_finite(grad, policy, "grpo gradient");
            nets::adam_step(policy.params(), grad, actor_optim);
            ++stats.grad_steps;
            loss_accum += mb_loss;
            entropy_accum += mb_entropy / static_cast<double>(mb.size());
            ++loss_samples;
        }
    }
    if (loss_samples) {
        stats.policy_loss = loss_accum / loss_samples;
        stats.entropy = entropy_accum / loss_samples;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// SFT
// ---------------------------------------------------------------------------

UpdateStats sft_update(const std::vector<EncodedHistory>& gold, GruNet& policy,
                       const TrainConfig& cfg, nets::AdamState& actor_optim,
                       Rng& update_rng) {
    if (gold.empty()) throw std::invalid_argument("sft needs a nonempty dataset");
    UpdateStats stats;
    const int n = static_cast<int>(gold.size());
    // exactly one pass over the data
    const auto plan = minibatch_plan(n, cfg.sft_minibatch, update_rng);
    double loss_accum = 0.0;
    for (const std::vector<int>& mb : plan) {
        long long mb_tokens = 0;
        for (int i : mb) mb_tokens += static_cast<long long>(gold[i].action_positions.size());
        const double inv_tokens = mb_tokens ? 1.0 / static_cast<double>(mb_tokens) : 0.0;
        std::vector<TrajGradResult> grads(mb.size());
        rollout::parallel_for(static_cast<int>(mb.size()), cfg.parallelism, [&](int s) {
            auto objective = [&](int, double new_logp) {
                return SurrogateTerm{-new_logp * inv_tokens, -inv_tokens};
            };
            grads[s] = policy_objective_grad(policy, gold[mb[s]], 1.0, objective, 0.0);
        });
        std::vector<double> grad(policy.param_count(), 0.0);
        double mb_loss = 0.0;
        for (size_t s = 0; s < mb.size(); ++s) {
            add_into(grad, grads[s].grad);
            mb_loss += grads[s].loss;
        }
        nets::check_finite(grad, policy, "sft gradient");
        nets::adam_step(policy.params(), grad, actor_optim);
        ++stats.grad_steps;
        loss_accum += mb_loss;
    }
    stats.policy_loss = loss_accum / static_cast<double>(plan.size());
    return stats;
}

codec::EncodedHistory make_gold_history(const world::EnvSpec& spec,
                                        const Vocabulary& vocab) {
    world::World env = world::World::generate(spec);
    rollout::ScriptedActionSource source(vocab, env.gold());
    rollout::SamplingOptions opts;
    opts.max_action_tokens = 8;
    opts.max_context = 4096;
    const Trajectory traj = rollout::run_episode(spec, source, vocab, opts);
    if (!traj.success) {
        throw std::runtime_error("gold replay failed for " + spec.compact_string());
    }
    return traj.history;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

constexpr uint64_t kInitStream = 0x1a17;
constexpr uint64_t kCollectStream = 0xc011;
constexpr uint64_t kUpdateStream = 0x0bda;
constexpr uint64_t kEvalStream = 0xe7a1;
constexpr uint64_t kSftStream = 0x5f70;

void check_seed_disjoint(const std::vector<world::EnvSpec>& a,
                         const std::vector<world::EnvSpec>& b, const char* what) {
    std::set<uint64_t> seeds;
    for (const auto& s : a) seeds.insert(s.seed);
    for (const auto& s : b) {
        if (seeds.count(s.seed)) {
            throw std::invalid_argument(std::string("seed overlap between ") + what +
                                        " (seed " + std::to_string(s.seed) + ")");
        }
    }
}

EpochRecord eval_record(int epoch, const std::string& algorithm,
                        const rollout::EvalResult& eval) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.algorithm = algorithm;
    rec.evaluated = true;
    for (size_t i = 0; i < eval.spec_names.size(); ++i) {
        rec.success[eval.spec_names[i]] = eval.success_rates[i];
    }
    return rec;
}

} // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<world::EnvSpec>& train_specs,
                  const std::vector<world::EnvSpec>& eval_specs,
                  const EpochCallback& on_epoch, const CheckpointCallback& on_checkpoint) {
    cfg.validate();
    if (train_specs.empty()) throw std::invalid_argument("no training specs");
    if (eval_specs.empty()) throw std::invalid_argument("no eval specs");
    check_seed_disjoint(train_specs, eval_specs, "train and eval specs");

    TrainResult result;
    result.vocab = Vocabulary::default_vocab();
    const Vocabulary& vocab = result.vocab;
    const int V = vocab.size();

    GruNet policy(V, cfg.d_embed, cfg.d_hidden, V);
    GruNet value(V, cfg.d_embed, cfg.d_hidden, 1);
    Rng init_rng(mix_seed(cfg.seed, kInitStream));
    policy.init_params(init_rng);
    value.init_params(init_rng);

    nets::AdamState actor_optim, critic_optim;
    actor_optim.lr = cfg.actor_lr;
    actor_optim.reset(policy.param_count());
    critic_optim.lr = cfg.critic_lr;
    critic_optim.reset(value.param_count());

    rollout::SamplingOptions rollout_opts;
    rollout_opts.temperature = cfg.temperature;
    rollout_opts.max_action_tokens = cfg.max_action_tokens;
    rollout_opts.max_context = cfg.max_context;
    rollout::SamplingOptions eval_opts = rollout_opts;
    eval_opts.temperature = cfg.eval_temperature;
    eval_opts.greedy = cfg.eval_greedy;

    auto run_eval = [&](int epoch) {
        return rollout::evaluate(policy, vocab, eval_specs, cfg.eval_episodes_per_spec,
                                 eval_opts, cfg.parallelism,
                                 mix_seed(cfg.seed, kEvalStream, static_cast<uint64_t>(epoch)));
    };
    auto emit = [&](EpochRecord rec, std::chrono::steady_clock::time_point started) {
        rec.wall_seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - started).count();
        result.records.push_back(rec);
        if (on_epoch) on_epoch(result.records.back());
    };

    // epoch 0: untrained baseline
    auto t0 = std::chrono::steady_clock::now();
    result.baseline = run_eval(0);
    result.final_eval = result.baseline;
    emit(eval_record(0, "baseline", result.baseline), t0);

    // SFT phase: warm start for RL algorithms, the whole run for SFT
    if (cfg.sft_demos > 0 || cfg.algorithm == Algorithm::SFT) {
        if (cfg.sft_demos <= 0) {
            throw std::invalid_argument("sft run needs sft_demos > 0");
        }
        std::vector<world::EnvSpec> demo_specs(cfg.sft_demos);
        for (int i = 0; i < cfg.sft_demos; ++i) {
            world::EnvSpec s = train_specs[i % train_specs.size()];
            s.seed = cfg.sft_seed_base + static_cast<uint64_t>(i);
            demo_specs[i] = s;
        }
        check_seed_disjoint(demo_specs, train_specs, "sft and train specs");
        check_seed_disjoint(demo_specs, eval_specs, "sft and eval specs");
        std::vector<EncodedHistory> gold(cfg.sft_demos);
        rollout::parallel_for(cfg.sft_demos, cfg.parallelism, [&](int i) {
            gold[i] = make_gold_history(demo_specs[i], vocab);
        });
        auto ts = std::chrono::steady_clock::now();
        nets::AdamState sft_optim;
        sft_optim.lr = cfg.sft_lr;
        sft_optim.reset(policy.param_count());
        Rng sft_rng(mix_seed(cfg.seed, kSftStream));
        const UpdateStats stats = sft_update(gold, policy, cfg, sft_optim, sft_rng);
        result.final_eval = run_eval(-1);
        EpochRecord rec = eval_record(0, "sft", result.final_eval);
        rec.policy_loss = stats.policy_loss;
        emit(rec, ts);
    }

    // reference policy: frozen at RL start (post-SFT when a warm start ran)
    GruNet ref = policy;

    const int epochs = cfg.algorithm == Algorithm::SFT ? 0 : cfg.epochs;
    const int tasks_per_epoch = cfg.batch_size / cfg.group_size;
    const int n_train = static_cast<int>(train_specs.size());

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        auto te = std::chrono::steady_clock::now();
        std::vector<world::EnvSpec> tasks(tasks_per_epoch);
        for (int i = 0; i < tasks_per_epoch; ++i) {
            tasks[i] = train_specs[((epoch - 1) * tasks_per_epoch + i) % n_train];
        }
        RolloutBatch batch =
            rollout::collect_batch(tasks, cfg.group_size, policy, vocab, rollout_opts,
                                   cfg.parallelism,
                                   mix_seed(cfg.seed, kCollectStream,
                                            static_cast<uint64_t>(epoch)));
        batch.policy_version = epoch - 1;

        Rng update_rng(mix_seed(cfg.seed, kUpdateStream, static_cast<uint64_t>(epoch)));
        UpdateStats stats;
        switch (cfg.algorithm) {
            case Algorithm::PPO:
                stats = ppo_update(batch, policy, value, ref, cfg, actor_optim,
                                   critic_optim, update_rng);
                break;
            case Algorithm::RLOO:
                stats = rloo_update(batch, policy, ref, cfg, actor_optim);
                break;
            case Algorithm::GRPO:
                stats = grpo_update(batch, policy, ref, cfg, actor_optim, update_rng);
                break;
            case Algorithm::SFT:
                break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.algorithm = to_string(cfg.algorithm);
        double mean_return = 0.0;
        for (const Trajectory& t : batch.trajectories) mean_return += t.total_return;
        rec.mean_return = mean_return / static_cast<double>(batch.trajectories.size());
        rec.mean_kl = stats.mean_kl;
        rec.policy_loss = stats.policy_loss;
        rec.value_loss = stats.value_loss;
        rec.entropy = stats.entropy;
        rec.density = rollout::measure_density(batch.trajectories);
        if (epoch % cfg.eval_every == 0 || epoch == epochs) {
            const rollout::EvalResult eval = run_eval(epoch);
            result.final_eval = eval;
            rec.evaluated = true;
            for (size_t i = 0; i < eval.spec_names.size(); ++i) {
                rec.success[eval.spec_names[i]] = eval.success_rates[i];
            }
        }
        emit(rec, te);

        if (on_checkpoint && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
            epoch != epochs) {
            nets::Checkpoint ckpt;
            ckpt.arch = "gru";
            ckpt.d_embed = cfg.d_embed;
            ckpt.d_hidden = cfg.d_hidden;
            ckpt.vocab_size = V;
            ckpt.vocab_hash = vocab.hash();
            ckpt.policy_params = policy.params();
            ckpt.value_params = value.params();
            ckpt.policy_optim = actor_optim;
            ckpt.value_optim = critic_optim;
            ckpt.meta = {{"algorithm", to_string(cfg.algorithm)},
                         {"epoch", std::to_string(epoch)}};
            on_checkpoint(ckpt, epoch);
        }
    }

    result.checkpoint.arch = "gru";
    result.checkpoint.d_embed = cfg.d_embed;
    result.checkpoint.d_hidden = cfg.d_hidden;
    result.checkpoint.vocab_size = V;
    result.checkpoint.vocab_hash = vocab.hash();
    result.checkpoint.policy_params = policy.params();
    result.checkpoint.value_params = value.params();
    result.checkpoint.policy_optim = actor_optim;
    result.checkpoint.value_optim = critic_optim;
    result.checkpoint.meta = {{"algorithm", to_string(cfg.algorithm)},
                              {"epoch", std::to_string(epochs)},
                              {"train_spec", train_specs[0].woq_string()}};
    if (on_checkpoint) on_checkpoint(result.checkpoint, epochs);
    return result;
}

} // namespace microturn::train
