#include "rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace microturn::rollout {

using codec::EncodedHistory;
using codec::Vocabulary;

// ---------------------------------------------------------------------------
// Action sources
// ---------------------------------------------------------------------------

NetActionSource::NetActionSource(const nets::GruNet& net, const SamplingOptions& opts,
                                 uint64_t seed)
    : net_(net), opts_(opts), rng_(seed), stream_(net.make_stream()),
      logits_(net.out_dim(), 0.0) {}

SampledAction NetActionSource::propose(const EncodedHistory& history) {
    if (!history.pending) throw std::logic_error("propose() needs a pending turn");
    for (int i = stream_.consumed; i < history.length(); ++i) {
        net_.stream_push(stream_, history.tokens[i], logits_);
    }
    SampledAction action;
    for (int j = 0; j < opts_.max_action_tokens; ++j) {
        int token;
        double logp;
        const bool last_slot = j + 1 == opts_.max_action_tokens;
        if (last_slot) {
            token = Vocabulary::kEosAction;
            logp = nets::log_softmax_at(logits_, opts_.greedy ? 1.0 : opts_.temperature,
                                        token);
            action.forced_eos = true;
        } else if (opts_.greedy) {
            token = nets::argmax_token(logits_);
            logp = nets::log_softmax_at(logits_, 1.0, token);
        } else {
            const nets::SampledToken pick =
                nets::sample_token(logits_, opts_.temperature, rng_);
            token = pick.token;
            logp = pick.logp;
        }
        action.tokens.push_back(token);
        action.logps.push_back(logp);
        net_.stream_push(stream_, token, logits_);
        if (token == Vocabulary::kEosAction) break;
    }
    return action;
}

ScriptedActionSource::ScriptedActionSource(const Vocabulary& vocab,
                                           std::vector<std::string> commands)
    : vocab_(vocab), commands_(std::move(commands)) {}

SampledAction ScriptedActionSource::propose(const EncodedHistory&) {
    SampledAction action;
    std::vector<int> ids;
    if (next_ < commands_.size()) ids = vocab_.encode(commands_[next_]);
    ++next_;
    ids.push_back(Vocabulary::kEosAction);
    action.tokens = ids;
    action.logps.assign(ids.size(), 0.0);
    return action;
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

std::string normalize_command(const std::string& raw) {
    std::string out;
    bool in_space = true;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

Trajectory run_episode(const world::EnvSpec& spec, ActionSource& source,
                       const Vocabulary& vocab, const SamplingOptions& opts) {
    Trajectory traj;
    traj.spec = spec;
    traj.temperature = opts.temperature;

    world::World env = world::World::generate(spec);
    env.reset();
    traj.history.begin(vocab, env.objective_text(), env.look_text());

    if (traj.history.length() + opts.max_action_tokens > opts.max_context) {
        traj.truncated = true;  // the prompt alone leaves no room to act
    }
    while (!traj.truncated) {
        const SampledAction action = source.propose(traj.history);
        std::vector<int> command_ids(action.tokens.begin(), action.tokens.end() - 1);
        const std::string command = normalize_command(vocab.decode(command_ids));
        traj.history.append_action(vocab, action.tokens);
        traj.old_logps.insert(traj.old_logps.end(), action.logps.begin(),
                              action.logps.end());

        const world::StepOutcome out = env.step(command);
        traj.turn_rewards.push_back(out.reward);
        traj.commands.push_back(command);
        ++traj.turns;
        if (out.done) break;
        const int segment = codec::EncodedHistory::state_segment_length(vocab,
                                                                        out.observation);
        if (traj.history.length() + segment + opts.max_action_tokens > opts.max_context) {
            traj.truncated = true;  // next turn cannot fit; count as a failure
            break;
        }
        traj.history.append_state(vocab, out.observation);
    }

    traj.success = env.quest_complete() && !traj.truncated;
    traj.token_rewards = codec::reward_vector(traj.history, traj.turn_rewards);
    for (double r : traj.turn_rewards) traj.total_return += r;
    return traj;
}

Trajectory run_episode(const world::EnvSpec& spec, const nets::GruNet& policy,
                       const Vocabulary& vocab, const SamplingOptions& opts,
                       uint64_t episode_seed) {
    NetActionSource source(policy, opts, episode_seed);
    Trajectory traj = run_episode(spec, source, vocab, opts);
    traj.episode_seed = episode_seed;
    return traj;
}

// ---------------------------------------------------------------------------
// Batch collection
// ---------------------------------------------------------------------------

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(workers, n);
    pool.reserve(count);
    for (int t = 0; t < count; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

RolloutBatch collect_batch(const std::vector<world::EnvSpec>& tasks, int k,
                           const nets::GruNet& policy, const Vocabulary& vocab,
                           const SamplingOptions& opts, int parallelism,
                           uint64_t collection_seed) {
    if (k < 1) throw std::invalid_argument("group size must be >= 1");
    RolloutBatch batch;
    batch.group_size = k;
    batch.temperature = opts.temperature;
    const int n = static_cast<int>(tasks.size()) * k;
    batch.trajectories.resize(n);
    parallel_for(n, parallelism, [&](int i) {
        const world::EnvSpec& spec = tasks[i / k];
        const uint64_t seed = mix_seed(collection_seed, static_cast<uint64_t>(i));
        batch.trajectories[i] = run_episode(spec, policy, vocab, opts, seed);
    });
    return batch;
}

EvalResult evaluate(const nets::GruNet& policy, const Vocabulary& vocab,
                    const std::vector<world::EnvSpec>& eval_specs, int episodes_per_spec,
                    const SamplingOptions& opts, int parallelism, uint64_t eval_seed) {
    EvalResult result;
    const int n = static_cast<int>(eval_specs.size()) * episodes_per_spec;
    std::vector<int> wins(n, 0);
    parallel_for(n, parallelism, [&](int i) {
        const world::EnvSpec& spec = eval_specs[i / episodes_per_spec];
        const uint64_t seed = mix_seed(eval_seed, 0x6576616cULL, static_cast<uint64_t>(i));
        const Trajectory traj = run_episode(spec, policy, vocab, opts, seed);
        wins[i] = traj.success ? 1 : 0;
    });
    result.episodes = n;
    // aggregate by environment class: specs sharing a name (same w-o-q and
    // family axis) pool their episodes
    std::vector<std::string> names;
    std::vector<int> name_wins, name_episodes;
    int total = 0;
    for (size_t s = 0; s < eval_specs.size(); ++s) {
        int spec_wins = 0;
        for (int j = 0; j < episodes_per_spec; ++j) {
            spec_wins += wins[s * episodes_per_spec + j];
        }
        total += spec_wins;
        std::string name = eval_specs[s].woq_string();
        if (eval_specs[s].family != world::QuestFamily::Mixed) {
            name += ":" + world::to_string(eval_specs[s].family);
        }
        const auto it = std::find(names.begin(), names.end(), name);
        const size_t idx = it - names.begin();
        if (it == names.end()) {
            names.push_back(name);
            name_wins.push_back(0);
            name_episodes.push_back(0);
        }
        name_wins[idx] += spec_wins;
        name_episodes[idx] += episodes_per_spec;
    }
    for (size_t i = 0; i < names.size(); ++i) {
        result.spec_names.push_back(names[i]);
        result.success_rates.push_back(static_cast<double>(name_wins[i]) /
                                       std::max(1, name_episodes[i]));
    }
    result.overall = n > 0 ? static_cast<double>(total) / n : 0.0;
    return result;
}

double measure_density(const std::vector<Trajectory>& trajectories) {
    std::vector<std::vector<double>> rewards;
    rewards.reserve(trajectories.size());
    for (const Trajectory& t : trajectories) rewards.push_back(t.turn_rewards);
    return world::measure_density(rewards);
}

std::string dump_trajectory(const Trajectory& t) {
    nlohmann::ordered_json record;
    record["spec"] = t.spec.compact_string();
    record["commands"] = t.commands;
    record["turn_rewards"] = t.turn_rewards;
    record["success"] = t.success;
    record["truncated"] = t.truncated;
    record["return"] = t.total_return;
    return record.dump();
}

} // namespace microturn::rollout
