// Command-line front end. Talks to the core exclusively through the C API in
// microturn/microturn.h; flags are folded into a JSON override block and
// resolved by the library.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "microturn/microturn.h"

namespace {

using nlohmann::json;

struct CommonFlags {
    std::string config;
    std::string spec;
    std::string algo;
    std::string preset;
    std::string out = "out";
    uint64_t seed = 0;
    bool seed_set = false;
    int parallel = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_out = true) {
    cmd->add_option("--config", f.config, "JSON config file");
    cmd->add_option("--spec", f.spec, "environment spec string, e.g. w2-o3-q4");
    cmd->add_option("--algo", f.algo, "ppo | rloo | grpo | sft");
    cmd->add_option("--preset", f.preset, "paperA | paperC | desk");
    cmd->add_option("--seed", f.seed, "run seed")->each([&](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--parallel", f.parallel, "worker threads");
    if (with_out) cmd->add_option("--out", f.out, "output directory");
}

json overrides_from(const CommonFlags& f) {
    json o = json::object();
    if (!f.preset.empty()) o["preset"] = f.preset;
    if (!f.spec.empty()) o["env"]["spec"] = f.spec;
    if (!f.algo.empty()) o["train"]["algorithm"] = f.algo;
    if (f.seed_set) o["train"]["seed"] = f.seed;
    if (f.parallel > 0) {
        o["train"]["parallelism"] = f.parallel;
        o["plan"]["parallel"] = f.parallel;
    }
    return o;
}

// resolve config file + flag overrides + MICROTURN_SEED into one JSON blob
std::string resolve_or_die(const CommonFlags& f) {
    char* resolved = nullptr;
    const mt_status rc = mt_config_resolve(f.config.empty() ? nullptr : f.config.c_str(),
                                           overrides_from(f).dump().c_str(), &resolved);
    if (rc != MT_OK) {
        std::cerr << "error: " << mt_last_error() << "\n";
        std::exit(2);
    }
    std::string out(resolved);
    mt_string_free(resolved);
    return out;
}

int check(mt_status rc) {
    if (rc != MT_OK) {
        std::cerr << "error: " << mt_last_error() << "\n";
        return rc == MT_ERR_RUN_FAILED ? 3 : 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"microturn — multi-turn RL on a procedurally generated text microworld"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, plan_flags;
    std::string gen_kind = "rl";
    int gen_count = 100;
    uint64_t gen_seed_base = 0;
    bool gen_seed_base_set = false;

    CLI::App* gen = app.add_subcommand("gen", "generate dataset files");
    add_common(gen, gen_flags);
    gen->add_option("--kind", gen_kind, "rl | sft | eval")->required();
    gen->add_option("--count", gen_count, "number of episodes/specs");
    gen->add_option("--seed-base", gen_seed_base, "first seed of the block")
        ->each([&](const std::string&) { gen_seed_base_set = true; });

    CLI::App* train = app.add_subcommand("train", "run one training configuration");
    add_common(train, train_flags);

    std::string eval_checkpoint;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on eval specs");
    add_common(eval, eval_flags, false);
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();

    CLI::App* plan = app.add_subcommand("plan", "execute an experiment suite");
    add_common(plan, plan_flags);

    std::string report_dir;
    bool report_charts = false;
    CLI::App* report = app.add_subcommand("report", "rebuild summary CSVs from metrics");
    report->add_option("dir", report_dir, "run or plan directory")->required();
    report->add_flag("--charts", report_charts, "also render SVG learning curves");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        if (!gen_seed_base_set) {
            gen_seed_base = gen_kind == "rl" ? 30001 : gen_kind == "sft" ? 40001 : 1;
        }
        const std::string cfg = resolve_or_die(gen_flags);
        char* path = nullptr;
        const int rc = check(mt_gen(cfg.c_str(), gen_kind.c_str(), gen_count,
                                    gen_seed_base, gen_flags.out.c_str(), &path));
        if (rc == 0) {
            std::cout << path << "\n";
            mt_string_free(path);
        }
        return rc;
    }
    if (train->parsed()) {
        const std::string cfg = resolve_or_die(train_flags);
        const int rc = check(mt_train(cfg.c_str(), train_flags.out.c_str()));
        if (rc == 0) std::cout << "run written to " << train_flags.out << "\n";
        return rc;
    }
    if (eval->parsed()) {
        const std::string cfg = resolve_or_die(eval_flags);
        char* result = nullptr;
        const int rc = check(mt_eval(cfg.c_str(), eval_checkpoint.c_str(), &result));
        if (rc == 0) {
            std::cout << result << "\n";
            mt_string_free(result);
        }
        return rc;
    }
    if (plan->parsed()) {
        const std::string cfg = resolve_or_die(plan_flags);
        const int rc = check(mt_run_plan(cfg.c_str(), plan_flags.out.c_str()));
        if (rc == 0) std::cout << "plan written to " << plan_flags.out << "\n";
        return rc;
    }
    if (report->parsed()) {
        return check(mt_report(report_dir.c_str(), report_charts ? 1 : 0));
    }
    return 0;
}
