#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace microturn::config {

using nlohmann::json;

std::vector<world::EnvSpec> Config::train_specs() const {
    std::vector<world::EnvSpec> specs(train_tasks);
    for (int i = 0; i < train_tasks; ++i) {
        specs[i] = env;
        specs[i].seed = train_seed_base + static_cast<uint64_t>(i);
    }
    return specs;
}

std::vector<world::EnvSpec> Config::eval_specs() const {
    std::vector<world::EnvSpec> specs(eval_count);
    for (int i = 0; i < eval_count; ++i) {
        specs[i] = env;
        specs[i].seed = eval_seed_base + static_cast<uint64_t>(i);
    }
    return specs;
}

void apply_preset(train::TrainConfig& cfg, const std::string& preset) {
    if (preset == "desk") {
        cfg = train::TrainConfig{};
        return;
    }
    if (preset == "paperA") {
        // sweep winner: kl 0.01, temperature 0.7, actor 1e-6, critic 1e-5, gamma 1
        cfg.kl_coef = 0.01;
        cfg.temperature = 0.7;
        cfg.actor_lr = 1e-6;
        cfg.critic_lr = 1e-5;
        cfg.gamma = 1.0;
        return;
    }
    if (preset == "paperC") {
        // per-algorithm defaults: clip 0.2, zero entropy, group size 4,
        // kl 0.001, actor 5e-7, critic 5e-6, batch 256, sft lr 1e-6
        cfg.clip_eps = 0.2;
        cfg.entropy_coef = 0.0;
        cfg.group_size = 4;
        cfg.kl_coef = 0.001;
        cfg.actor_lr = 5e-7;
        cfg.critic_lr = 5e-6;
        cfg.batch_size = 256;
        cfg.sft_lr = 1e-6;
        cfg.gamma = 1.0;
        return;
    }
    throw std::invalid_argument("unknown preset: " + preset);
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw std::invalid_argument("unknown config key " + where + "." + it.key());
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_env(const json& j, world::EnvSpec& env) {
    reject_unknown(j, {"spec", "seed", "scheme", "max_steps", "family"}, "env");
    if (j.contains("spec")) {
        const world::EnvSpec parsed = world::EnvSpec::parse_woq(j.at("spec").get<std::string>());
        env.world_size = parsed.world_size;
        env.object_count = parsed.object_count;
        env.quest_length = parsed.quest_length;
        if (!j.contains("max_steps")) env.max_steps = parsed.max_steps;
    }
    read(j, "seed", env.seed);
    if (j.contains("scheme")) {
        env.scheme = world::reward_scheme_from_string(j.at("scheme").get<std::string>());
    }
    read(j, "max_steps", env.max_steps);
    if (j.contains("family")) {
        env.family = world::quest_family_from_string(j.at("family").get<std::string>());
    }
}

void parse_train(const json& j, Config& c) {
    reject_unknown(j,
                   {"algorithm", "actor_lr", "critic_lr", "clip_eps", "gamma", "lambda",
                    "kl_coef", "kl_mode", "entropy_coef", "advantage_norm", "batch_size", "group_size",
                    "temperature", "epochs", "ppo_update_epochs", "minibatch_size", "seed",
                    "d_embed", "d_hidden", "max_action_tokens", "max_context", "sft_demos",
                    "sft_lr", "sft_minibatch", "sft_seed_base", "eval_every",
                    "checkpoint_every", "parallelism", "train_seed_base", "train_tasks"},
                   "train");
    train::TrainConfig& t = c.train;
    if (j.contains("algorithm")) {
        t.algorithm = train::algorithm_from_string(j.at("algorithm").get<std::string>());
    }
    read(j, "actor_lr", t.actor_lr);
    read(j, "critic_lr", t.critic_lr);
    read(j, "clip_eps", t.clip_eps);
    read(j, "gamma", t.gamma);
    read(j, "lambda", t.lambda);
    read(j, "kl_coef", t.kl_coef);
    if (j.contains("kl_mode")) {
        const std::string mode = j.at("kl_mode").get<std::string>();
        if (mode == "in_reward") t.kl_mode = train::KlMode::InReward;
        else if (mode == "in_loss") t.kl_mode = train::KlMode::InLoss;
        else throw std::invalid_argument("unknown kl_mode: " + mode);
    }
    read(j, "entropy_coef", t.entropy_coef);
    read(j, "advantage_norm", t.advantage_norm);
    read(j, "batch_size", t.batch_size);
    read(j, "group_size", t.group_size);
    read(j, "temperature", t.temperature);
    read(j, "epochs", t.epochs);
    read(j, "ppo_update_epochs", t.ppo_update_epochs);
    read(j, "minibatch_size", t.minibatch_size);
    read(j, "seed", t.seed);
    read(j, "d_embed", t.d_embed);
    read(j, "d_hidden", t.d_hidden);
    read(j, "max_action_tokens", t.max_action_tokens);
    read(j, "max_context", t.max_context);
    read(j, "sft_demos", t.sft_demos);
    read(j, "sft_lr", t.sft_lr);
    read(j, "sft_minibatch", t.sft_minibatch);
    read(j, "sft_seed_base", t.sft_seed_base);
    read(j, "eval_every", t.eval_every);
    read(j, "checkpoint_every", t.checkpoint_every);
    read(j, "parallelism", t.parallelism);
    read(j, "train_seed_base", c.train_seed_base);
    read(j, "train_tasks", c.train_tasks);
}

void parse_eval(const json& j, Config& c) {
    reject_unknown(j, {"seed_base", "count", "episodes_per_spec", "temperature", "greedy"},
                   "eval");
    read(j, "seed_base", c.eval_seed_base);
    read(j, "count", c.eval_count);
    read(j, "episodes_per_spec", c.train.eval_episodes_per_spec);
    read(j, "temperature", c.train.eval_temperature);
    read(j, "greedy", c.train.eval_greedy);
}

} // namespace

Config parse_config(const json& j) {
    reject_unknown(j, {"preset", "env", "train", "eval", "plan"}, "");
    Config c;
    if (j.contains("preset")) apply_preset(c.train, j.at("preset").get<std::string>());
    if (j.contains("env")) parse_env(j.at("env"), c.env);
    if (j.contains("train")) parse_train(j.at("train"), c);
    if (j.contains("eval")) parse_eval(j.at("eval"), c);
    if (j.contains("plan")) c.plan = j.at("plan");
    if (!c.plan.is_object() && !c.plan.is_null()) {
        throw std::invalid_argument("plan section must be an object");
    }
    if (c.plan.is_null()) c.plan = json::object();
    return c;
}

json config_to_json(const Config& c) {
    json j;
    j["env"] = {{"spec", c.env.woq_string()},
                {"seed", c.env.seed},
                {"scheme", world::to_string(c.env.scheme)},
                {"max_steps", c.env.max_steps},
                {"family", world::to_string(c.env.family)}};
    const train::TrainConfig& t = c.train;
    j["train"] = {
        {"algorithm", train::to_string(t.algorithm)},
        {"actor_lr", t.actor_lr},
        {"critic_lr", t.critic_lr},
        {"clip_eps", t.clip_eps},
        {"gamma", t.gamma},
        {"lambda", t.lambda},
        {"kl_coef", t.kl_coef},
        {"kl_mode", t.kl_mode == train::KlMode::InReward ? "in_reward" : "in_loss"},
        {"entropy_coef", t.entropy_coef},
        {"advantage_norm", t.advantage_norm},
        {"batch_size", t.batch_size},
        {"group_size", t.group_size},
        {"temperature", t.temperature},
        {"epochs", t.epochs},
        {"ppo_update_epochs", t.ppo_update_epochs},
        {"minibatch_size", t.minibatch_size},
        {"seed", t.seed},
        {"d_embed", t.d_embed},
        {"d_hidden", t.d_hidden},
        {"max_action_tokens", t.max_action_tokens},
        {"max_context", t.max_context},
        {"sft_demos", t.sft_demos},
        {"sft_lr", t.sft_lr},
        {"sft_minibatch", t.sft_minibatch},
        {"sft_seed_base", t.sft_seed_base},
        {"eval_every", t.eval_every},
        {"checkpoint_every", t.checkpoint_every},
        {"parallelism", t.parallelism},
        {"train_seed_base", c.train_seed_base},
        {"train_tasks", c.train_tasks},
    };
    j["eval"] = {{"seed_base", c.eval_seed_base},
                 {"count", c.eval_count},
                 {"episodes_per_spec", t.eval_episodes_per_spec},
                 {"temperature", t.eval_temperature},
                 {"greedy", t.eval_greedy}};
    j["plan"] = c.plan;
    return j;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    return j;
}

namespace {

void deep_merge(json& base, const json& overlay) {
    if (!overlay.is_object()) {
        base = overlay;
        return;
    }
    if (!base.is_object()) base = json::object();
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (base.contains(it.key())) {
            deep_merge(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

} // namespace

Config resolve_config(const std::optional<std::string>& config_path, const json& overrides) {
    json merged = json::object();
    if (config_path) deep_merge(merged, load_json_file(*config_path));
    if (!overrides.is_null()) deep_merge(merged, overrides);
    Config c = parse_config(merged);
    if (const char* env_seed = std::getenv("MICROTURN_SEED")) {
        c.train.seed = std::stoull(env_seed);
    }
    return c;
}

} // namespace microturn::config
