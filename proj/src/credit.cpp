#include "credit.hpp"

#include <cmath>
#include <stdexcept>

namespace microturn::credit {

std::vector<double> td_errors(const std::vector<double>& values,
                              const std::vector<double>& rewards, double gamma) {
    if (values.size() != rewards.size()) {
        throw std::logic_error("td_errors: values/rewards length mismatch");
    }
    const size_t n = values.size();
    std::vector<double> deltas(n);
    for (size_t j = 0; j < n; ++j) {
        const double v_next = j + 1 < n ? values[j + 1] : 0.0;
        deltas[j] = rewards[j] + gamma * v_next - values[j];
    }
    return deltas;
}

std::vector<double> gae(const std::vector<double>& deltas, double gamma, double lambda) {
    std::vector<double> adv(deltas.size());
    double carry = 0.0;
    for (size_t j = deltas.size(); j-- > 0;) {
        carry = deltas[j] + gamma * lambda * carry;
        adv[j] = carry;
    }
    return adv;
}

std::vector<double> rloo_advantages(const std::vector<double>& group_returns) {
    const size_t k = group_returns.size();
    if (k < 2) throw std::invalid_argument("rloo needs a group of at least 2");
    double sum = 0.0;
    for (double r : group_returns) sum += r;
    std::vector<double> adv(k);
    for (size_t i = 0; i < k; ++i) {
        adv[i] = group_returns[i] - (sum - group_returns[i]) / static_cast<double>(k - 1);
    }
    return adv;
}

std::vector<double> grpo_advantages(const std::vector<double>& group_returns, double eps) {
    const size_t k = group_returns.size();
    if (k < 2) throw std::invalid_argument("grpo needs a group of at least 2");
    double mean = 0.0;
    for (double r : group_returns) mean += r;
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (double r : group_returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(k);
    const double denom = std::sqrt(var) + eps;
    std::vector<double> adv(k);
    for (size_t i = 0; i < k; ++i) adv[i] = (group_returns[i] - mean) / denom;
    return adv;
}

double discounted_return(const std::vector<double>& per_turn_rewards, double gamma) {
    double total = 0.0, w = 1.0;
    for (double r : per_turn_rewards) {
        total += w * r;
        w *= gamma;
    }
    return total;
}

AdvantageBatch gae_batch(const std::vector<double>& values,
                         const std::vector<double>& rewards, double gamma, double lambda) {
    AdvantageBatch batch;
    batch.estimator = "gae";
    batch.gamma = gamma;
    batch.lambda = lambda;
    batch.advantages = gae(td_errors(values, rewards, gamma), gamma, lambda);
    batch.value_targets.resize(values.size());
    for (size_t j = 0; j < values.size(); ++j) {
        batch.value_targets[j] = batch.advantages[j] + values[j];
    }
    return batch;
}

} // namespace microturn::credit
