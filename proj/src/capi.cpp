#include "microturn/microturn.h"

#include <cstdlib>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "harness.hpp"
#include "microworld.hpp"

namespace {

thread_local std::string g_last_error;

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

mt_status fail(mt_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

// Maps C++ exceptions onto status codes at the boundary.
template <typename Fn>
mt_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        return fail(MT_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::logic_error& e) {
        return fail(MT_ERR_BAD_STATE, e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(MT_ERR_FORMAT, e.what());
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        if (what.find("cannot read") != std::string::npos ||
            what.find("cannot write") != std::string::npos ||
            what.find("cannot open") != std::string::npos) {
            return fail(MT_ERR_IO, what);
        }
        return fail(MT_ERR_FORMAT, what);
    } catch (const std::exception& e) {
        return fail(MT_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MT_ERR_INTERNAL, "unknown error");
    }
}

microturn::config::Config config_from_json_text(const char* config_json) {
    if (!config_json) throw std::invalid_argument("config json is null");
    return microturn::config::parse_config(nlohmann::json::parse(config_json));
}

} // namespace

struct mt_env {
    microturn::world::World world;
};

extern "C" {

const char* mt_version(void) { return "0.1.0"; }

const char* mt_last_error(void) { return g_last_error.c_str(); }

void mt_string_free(char* s) { std::free(s); }

mt_status mt_env_create(const char* spec, mt_env** out) {
    return guarded([&]() -> mt_status {
        if (!spec || !out) return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        const std::string text(spec);
        const microturn::world::EnvSpec parsed =
            text.find(';') == std::string::npos
                ? microturn::world::EnvSpec::parse_woq(text)
                : microturn::world::EnvSpec::parse_compact(text);
        *out = new mt_env{microturn::world::World::generate(parsed)};
        return MT_OK;
    });
}

void mt_env_destroy(mt_env* env) { delete env; }

mt_status mt_env_reset(mt_env* env, char** observation) {
    return guarded([&]() -> mt_status {
        if (!env || !observation) return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        *observation = copy_string(env->world.reset());
        return MT_OK;
    });
}

mt_status mt_env_step(mt_env* env, const char* command, char** observation,
                      mt_step_info* info) {
    return guarded([&]() -> mt_status {
        if (!env || !command) return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        const microturn::world::StepOutcome out = env->world.step(command);
        if (observation) *observation = copy_string(out.observation);
        if (info) {
            info->reward = out.reward;
            info->done = out.done ? 1 : 0;
            info->milestone_hit = out.milestone_hit ? 1 : 0;
            info->invalid_command = out.invalid_command ? 1 : 0;
        }
        return MT_OK;
    });
}

mt_status mt_env_gold(mt_env* env, char** commands) {
    return guarded([&]() -> mt_status {
        if (!env || !commands) return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        std::string joined;
        for (const std::string& cmd : env->world.gold()) {
            if (!joined.empty()) joined += '\t';
            joined += cmd;
        }
        *commands = copy_string(joined);
        return MT_OK;
    });
}

mt_status mt_env_admissible(mt_env* env, char** commands) {
    return guarded([&]() -> mt_status {
        if (!env || !commands) return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        std::string joined;
        for (const std::string& cmd : env->world.admissible_commands()) {
            joined += cmd;
            joined += '\n';
        }
        *commands = copy_string(joined);
        return MT_OK;
    });
}

mt_status mt_config_resolve(const char* config_path_or_null,
                            const char* overrides_json_or_null, char** resolved_json) {
    return guarded([&]() -> mt_status {
        if (!resolved_json) return fail(MT_ERR_INVALID_ARGUMENT, "null output");
        std::optional<std::string> path;
        if (config_path_or_null) path = config_path_or_null;
        nlohmann::json overrides;
        if (overrides_json_or_null) overrides = nlohmann::json::parse(overrides_json_or_null);
        const microturn::config::Config cfg =
            microturn::config::resolve_config(path, overrides);
        *resolved_json = copy_string(microturn::config::config_to_json(cfg).dump(2));
        return MT_OK;
    });
}

mt_status mt_gen(const char* config_json, const char* kind, int count, uint64_t seed_base,
                 const char* out_dir, char** out_path) {
    return guarded([&]() -> mt_status {
        if (!kind || !out_dir) return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        const microturn::config::Config cfg = config_from_json_text(config_json);
        const std::string path = microturn::harness::gen_data(
            cfg.env, count, seed_base, microturn::harness::data_kind_from_string(kind),
            out_dir);
        if (out_path) *out_path = copy_string(path);
        return MT_OK;
    });
}

mt_status mt_train(const char* config_json, const char* out_dir) {
    return guarded([&]() -> mt_status {
        if (!out_dir) return fail(MT_ERR_INVALID_ARGUMENT, "null out_dir");
        const microturn::config::Config cfg = config_from_json_text(config_json);
        microturn::harness::RunDef run;
        run.name = "train";
        run.cfg = cfg;
        run.train_specs = cfg.train_specs();
        run.eval_specs = cfg.eval_specs();
        const microturn::harness::RunSummary summary =
            microturn::harness::execute_run(run, out_dir);
        if (!summary.ok) return fail(MT_ERR_RUN_FAILED, summary.error);
        return MT_OK;
    });
}

mt_status mt_eval(const char* config_json, const char* checkpoint_path,
                  char** result_json) {
    return guarded([&]() -> mt_status {
        if (!checkpoint_path || !result_json) {
            return fail(MT_ERR_INVALID_ARGUMENT, "null argument");
        }
        const microturn::config::Config cfg = config_from_json_text(config_json);
        const nlohmann::json result =
            microturn::harness::eval_checkpoint(cfg, checkpoint_path);
        *result_json = copy_string(result.dump(2));
        return MT_OK;
    });
}

mt_status mt_run_plan(const char* config_json, const char* out_dir) {
    return guarded([&]() -> mt_status {
        if (!out_dir) return fail(MT_ERR_INVALID_ARGUMENT, "null out_dir");
        const microturn::config::Config cfg = config_from_json_text(config_json);
        const int failures = microturn::harness::run_plan(cfg, out_dir);
        if (failures > 0) {
            return fail(MT_ERR_RUN_FAILED,
                        std::to_string(failures) + " plan run(s) failed");
        }
        return MT_OK;
    });
}

mt_status mt_report(const char* dir, int with_charts) {
    return guarded([&]() -> mt_status {
        if (!dir) return fail(MT_ERR_INVALID_ARGUMENT, "null dir");
        microturn::harness::report(dir, with_charts != 0);
        return MT_OK;
    });
}

} // extern "C"
