#ifndef MICROTURN_CREDIT_HPP_
#define MICROTURN_CREDIT_HPP_

#include <string>
#include <vector>

namespace microturn::credit {

// Token-level TD errors over the flattened action-token sequence of one
// trajectory. values[j] is V of the history up to and including action token
// j; the bootstrap value after the terminal token is 0. State tokens are
// conditioning context only, never timesteps.
std::vector<double> td_errors(const std::vector<double>& values,
                              const std::vector<double>& rewards, double gamma);

// Reverse-scan GAE: A[j] = delta[j] + gamma*lambda*A[j+1], A[last+1] = 0.
std::vector<double> gae(const std::vector<double>& deltas, double gamma, double lambda);

// Leave-one-out baseline advantages: a_i = R_i - mean_{j != i}(R_j).
// Requires a group of at least 2.
std::vector<double> rloo_advantages(const std::vector<double>& group_returns);

// Group-normalized advantages: a_i = (R_i - mean) / (std + eps), population
// standard deviation. Requires a group of at least 2.
std::vector<double> grpo_advantages(const std::vector<double>& group_returns, double eps);

// Discounted trajectory return over turns: sum_t gamma^t r_t.
double discounted_return(const std::vector<double>& per_turn_rewards, double gamma);

// Per-trajectory advantage estimate aligned with
// EncodedHistory.action_positions (one entry per action token, eos included).
struct AdvantageBatch {
    std::vector<double> advantages;
    std::vector<double> value_targets;  // advantages + values
    std::string estimator;
    double gamma = 1.0;
    double lambda = 0.95;
};

AdvantageBatch gae_batch(const std::vector<double>& values,
                         const std::vector<double>& rewards, double gamma, double lambda);

} // namespace microturn::credit

#endif // MICROTURN_CREDIT_HPP_
