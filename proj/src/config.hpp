#ifndef MICROTURN_CONFIG_HPP_
#define MICROTURN_CONFIG_HPP_

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "microworld.hpp"
#include "trainers.hpp"

namespace microturn::config {

// Resolved run configuration. JSON layout has four key groups:
//   env   — every EnvSpec field (spec string, seed, scheme, max_steps, family)
//   train — every TrainConfig field plus the task-sourcing knobs
//   eval  — held-out evaluation block (seed_base, count, episodes, decoding)
//   plan  — experiment-suite description (kind-specific, kept as JSON)
// Unknown keys anywhere are rejected.
struct Config {
    world::EnvSpec env;
    train::TrainConfig train;
    uint64_t train_seed_base = 30001;
    int train_tasks = 64;
    uint64_t eval_seed_base = 1;
    int eval_count = 64;
    nlohmann::json plan;  // empty object when absent

    // Task lists derived from the env template and the seed blocks.
    std::vector<world::EnvSpec> train_specs() const;
    std::vector<world::EnvSpec> eval_specs() const;
};

// Named presets: "paperA" (hyperparameter-sweep winner), "paperC"
// (per-algorithm defaults), "desk" (the desk-scale defaults; learning rates
// rescaled for the tiny from-scratch policy).
void apply_preset(train::TrainConfig& cfg, const std::string& preset);

Config parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& c);

// defaults <- preset <- file <- overrides <- MICROTURN_SEED
Config resolve_config(const std::optional<std::string>& config_path,
                      const nlohmann::json& overrides);

nlohmann::json load_json_file(const std::string& path);

} // namespace microturn::config

#endif // MICROTURN_CONFIG_HPP_
