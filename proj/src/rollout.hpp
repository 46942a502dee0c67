#ifndef MICROTURN_ROLLOUT_HPP_
#define MICROTURN_ROLLOUT_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "microworld.hpp"
#include "nets.hpp"
#include "textcodec.hpp"

namespace microturn::rollout {

struct SampledAction {
    std::vector<int> tokens;  // ends with kEosAction
    std::vector<double> logps;
    bool forced_eos = false;
};

// Produces one action per pending turn. The net-backed source keeps a
// recurrent stream in sync with the (append-only) history; scripted sources
// back the test oracles.
class ActionSource {
public:
    virtual ~ActionSource() = default;
    virtual SampledAction propose(const codec::EncodedHistory& history) = 0;
};

struct SamplingOptions {
    double temperature = 0.7;
    bool greedy = false;
    int max_action_tokens = 8;  // cap includes the forced terminator
    int max_context = 1024;
};

class NetActionSource : public ActionSource {
public:
    NetActionSource(const nets::GruNet& net, const SamplingOptions& opts, uint64_t seed);
    SampledAction propose(const codec::EncodedHistory& history) override;

private:
    const nets::GruNet& net_;
    SamplingOptions opts_;
    Rng rng_;
    nets::GruNet::Stream stream_;
    std::vector<double> logits_;
};

// Replays a fixed command list; log-probs are zero. Test oracle.
class ScriptedActionSource : public ActionSource {
public:
    ScriptedActionSource(const codec::Vocabulary& vocab, std::vector<std::string> commands);
    SampledAction propose(const codec::EncodedHistory& history) override;

private:
    const codec::Vocabulary& vocab_;
    std::vector<std::string> commands_;
    size_t next_ = 0;
};

struct Trajectory {
    world::EnvSpec spec;
    codec::EncodedHistory history;
    std::vector<double> token_rewards;  // aligned with history.tokens
    std::vector<double> old_logps;      // one per action token (eos included)
    std::vector<double> turn_rewards;
    std::vector<std::string> commands;
    bool success = false;
    bool truncated = false;  // context budget exhausted; counts as failure
    int turns = 0;
    double total_return = 0.0;  // undiscounted
    double temperature = 0.7;
    uint64_t episode_seed = 0;
};

struct RolloutBatch {
    std::vector<Trajectory> trajectories;  // grouped: task i occupies [i*k, (i+1)*k)
    int group_size = 1;
    double temperature = 0.7;
    int64_t policy_version = 0;
};

// One multi-turn episode: render pending history, sample, decode, step,
// place rewards on the action terminators.
Trajectory run_episode(const world::EnvSpec& spec, ActionSource& source,
                       const codec::Vocabulary& vocab, const SamplingOptions& opts);

// Convenience wrapper that builds a NetActionSource seeded per episode.
Trajectory run_episode(const world::EnvSpec& spec, const nets::GruNet& policy,
                       const codec::Vocabulary& vocab, const SamplingOptions& opts,
                       uint64_t episode_seed);

// k episodes per task with derived per-episode seeds; output order is
// deterministic regardless of parallelism.
RolloutBatch collect_batch(const std::vector<world::EnvSpec>& tasks, int k,
                           const nets::GruNet& policy, const codec::Vocabulary& vocab,
                           const SamplingOptions& opts, int parallelism,
                           uint64_t collection_seed);

struct EvalResult {
    std::vector<std::string> spec_names;
    std::vector<double> success_rates;  // per spec
    double overall = 0.0;
    int episodes = 0;
};

// Success rate per eval spec; each spec gets episodes_per_spec rollouts.
EvalResult evaluate(const nets::GruNet& policy, const codec::Vocabulary& vocab,
                    const std::vector<world::EnvSpec>& eval_specs, int episodes_per_spec,
                    const SamplingOptions& opts, int parallelism, uint64_t eval_seed);

// Mean steps between nonzero per-turn rewards across the batch.
double measure_density(const std::vector<Trajectory>& trajectories);

// Line-delimited records {spec, commands, per-turn rewards, success}.
std::string dump_trajectory(const Trajectory& t);

// Index-claiming worker pool; results must be written to preallocated,
// index-owned slots so order never depends on scheduling.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

std::string normalize_command(const std::string& raw);

} // namespace microturn::rollout

#endif // MICROTURN_ROLLOUT_HPP_
