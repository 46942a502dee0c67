#ifndef MICROTURN_TRAINERS_HPP_
#define MICROTURN_TRAINERS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "credit.hpp"
#include "microworld.hpp"
#include "nets.hpp"
#include "rollout.hpp"
#include "textcodec.hpp"

namespace microturn::train {

enum class Algorithm { PPO, RLOO, GRPO, SFT };
enum class KlMode { InReward, InLoss };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct TrainConfig {
    Algorithm algorithm = Algorithm::PPO;
    double actor_lr = 1e-3;
    double critic_lr = 3e-3;
    double clip_eps = 0.2;
    double gamma = 1.0;
    double lambda = 0.95;
    double kl_coef = 0.01;
    KlMode kl_mode = KlMode::InReward;  // GRPO always adds KL in the loss
    double entropy_coef = 0.0;
    bool advantage_norm = false;  // per-minibatch whitening of token advantages
    int batch_size = 64;   // episodes per epoch
    int group_size = 4;    // rollouts per task instance
    double temperature = 0.7;
    int epochs = 300;
    int ppo_update_epochs = 2;
    int minibatch_size = 16;  // episodes
    uint64_t seed = 1;

    // policy architecture / rollout limits
    int d_embed = 32;
    int d_hidden = 64;
    int max_action_tokens = 8;
    int max_context = 1024;

    // SFT: demo count doubles as the warm start size for RL algorithms
    int sft_demos = 0;
    double sft_lr = 1e-2;
    int sft_minibatch = 2;
    uint64_t sft_seed_base = 40001;

    // evaluation cadence
    int eval_every = 10;
    int eval_episodes_per_spec = 1;
    double eval_temperature = 0.7;
    bool eval_greedy = false;

    int checkpoint_every = 0;  // epochs; 0 = final only
    int parallelism = 1;

    void validate() const;  // throws std::invalid_argument
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double mean_kl = 0.0;      // k1 estimate vs the reference policy
    double entropy = 0.0;
    double max_ratio_dev = 0.0;  // max |ratio - 1| on the first minibatch
    int grad_steps = 0;
};

// Per-token clipped surrogate and its derivative w.r.t. the new log-prob.
struct SurrogateTerm {
    double loss;
    double dlogp;
};
SurrogateTerm clipped_surrogate(double new_logp, double old_logp, double advantage,
                                double clip_eps);

// New-policy log-probs of a trajectory's action tokens under softmax(./T).
std::vector<double> action_logps(const nets::GruNet& policy,
                                 const codec::EncodedHistory& history,
                                 double temperature);

// Loss and actor gradient of one trajectory under a per-token objective
// mapping (token index, new log-prob) to a loss term and dLoss/dlogp. This
// is the exact path every update consumes; exposed for gradient checks.
// Only logit rows feeding action tokens receive gradient.
struct TrajGradResult {
    std::vector<double> grad;
    double loss = 0.0;
    double entropy = 0.0;        // mean per action token
    double max_ratio_dev = 0.0;  // objectives that track ratios fill this
};
using TokenObjective = std::function<SurrogateTerm(int, double)>;
TrajGradResult policy_objective_grad(const nets::GruNet& policy,
                                     const codec::EncodedHistory& history,
                                     double temperature, const TokenObjective& objective,
                                     double entropy_scale);

// Squared-error value gradient at the action-token positions.
std::vector<double> value_objective_grad(const nets::GruNet& value,
                                         const codec::EncodedHistory& history,
                                         const std::vector<double>& targets, double scale,
                                         double* loss_out);

// Values of the value net at every action-token position (inclusive).
std::vector<double> action_values(const nets::GruNet& value,
                                  const codec::EncodedHistory& history);

// The four learning procedures. Every update keeps gradient accumulation in
// a fixed order, so results are identical at any parallelism.
UpdateStats ppo_update(const rollout::RolloutBatch& batch, nets::GruNet& policy,
                       nets::GruNet& value, const nets::GruNet& ref,
                       const TrainConfig& cfg, nets::AdamState& actor_optim,
                       nets::AdamState& critic_optim, Rng& update_rng);

UpdateStats rloo_update(const rollout::RolloutBatch& batch, nets::GruNet& policy,
                        const nets::GruNet& ref, const TrainConfig& cfg,
                        nets::AdamState& actor_optim);

UpdateStats grpo_update(const rollout::RolloutBatch& batch, nets::GruNet& policy,
                        const nets::GruNet& ref, const TrainConfig& cfg,
                        nets::AdamState& actor_optim, Rng& update_rng);

// Cross-entropy on action tokens only; exactly one pass over the data.
UpdateStats sft_update(const std::vector<codec::EncodedHistory>& gold,
                       nets::GruNet& policy, const TrainConfig& cfg,
                       nets::AdamState& actor_optim, Rng& update_rng);

// Gold demonstration rendered through the rollout path (same chat template).
codec::EncodedHistory make_gold_history(const world::EnvSpec& spec,
                                        const codec::Vocabulary& vocab);

struct EpochRecord {
    int epoch = 0;
    std::string algorithm;
    std::map<std::string, double> success;  // eval spec -> rate (eval epochs only)
    bool evaluated = false;
    double mean_return = 0.0;
    double mean_kl = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double density = 0.0;  // measured on the epoch's rollout batch
    double entropy = 0.0;
    double wall_seconds = 0.0;  // reported separately from deterministic metrics
};

struct TrainResult {
    std::vector<EpochRecord> records;
    rollout::EvalResult baseline;
    rollout::EvalResult final_eval;
    nets::Checkpoint checkpoint;
    codec::Vocabulary vocab;
};

using EpochCallback = std::function<void(const EpochRecord&)>;
using CheckpointCallback = std::function<void(const nets::Checkpoint&, int epoch)>;

// Full training loop: optional SFT warm start, per-epoch collect/update,
// periodic evaluation. Train and eval seeds must be disjoint.
TrainResult train(const TrainConfig& cfg, const std::vector<world::EnvSpec>& train_specs,
                  const std::vector<world::EnvSpec>& eval_specs,
                  const EpochCallback& on_epoch = nullptr,
                  const CheckpointCallback& on_checkpoint = nullptr);

} // namespace microturn::train

#endif // MICROTURN_TRAINERS_HPP_
