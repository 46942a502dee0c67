#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rollout.hpp"

namespace fs = std::filesystem;

namespace microturn::harness {

using config::Config;
using nlohmann::json;
using train::EpochRecord;

PlanKind plan_kind_from_string(const std::string& s) {
    if (s == "complexity_sweep") return PlanKind::ComplexitySweep;
    if (s == "exploration_study") return PlanKind::ExplorationStudy;
    if (s == "generalization_matrix") return PlanKind::GeneralizationMatrix;
    if (s == "mixture_study") return PlanKind::MixtureStudy;
    if (s == "budget_allocation") return PlanKind::BudgetAllocation;
    if (s == "density_study") return PlanKind::DensityStudy;
    if (s == "algorithm_compare") return PlanKind::AlgorithmCompare;
    throw std::invalid_argument("unknown plan kind: " + s);
}

std::string to_string(PlanKind k) {
    switch (k) {
        case PlanKind::ComplexitySweep: return "complexity_sweep";
        case PlanKind::ExplorationStudy: return "exploration_study";
        case PlanKind::GeneralizationMatrix: return "generalization_matrix";
        case PlanKind::MixtureStudy: return "mixture_study";
        case PlanKind::BudgetAllocation: return "budget_allocation";
        case PlanKind::DensityStudy: return "density_study";
        case PlanKind::AlgorithmCompare: return "algorithm_compare";
    }
    return "";
}

namespace {

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

json record_to_json(const EpochRecord& r) {
    json j;
    j["epoch"] = r.epoch;
    j["algorithm"] = r.algorithm;
    j["mean_return"] = r.mean_return;
    j["mean_kl"] = r.mean_kl;
    j["policy_loss"] = r.policy_loss;
    j["value_loss"] = r.value_loss;
    j["entropy"] = r.entropy;
    if (std::isinf(r.density)) j["density"] = nullptr;  // no reward seen
    else j["density"] = r.density;
    j["evaluated"] = r.evaluated;
    if (r.evaluated) {
        json s = json::object();
        for (const auto& [name, rate] : r.success) s[name] = rate;
        j["success"] = s;
    }
    return j;
}

EpochRecord record_from_json(const json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.algorithm = j.at("algorithm").get<std::string>();
    r.mean_return = j.at("mean_return").get<double>();
    r.mean_kl = j.at("mean_kl").get<double>();
    r.policy_loss = j.at("policy_loss").get<double>();
    r.value_loss = j.at("value_loss").get<double>();
    r.entropy = j.at("entropy").get<double>();
    r.density = j.at("density").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("density").get<double>();
    r.evaluated = j.at("evaluated").get<bool>();
    if (r.evaluated && j.contains("success")) {
        for (auto it = j.at("success").begin(); it != j.at("success").end(); ++it) {
            r.success[it.key()] = it.value().get<double>();
        }
    }
    return r;
}

bool is_rl_algorithm(const std::string& a) {
    return a == "ppo" || a == "rloo" || a == "grpo";
}

} // namespace

std::vector<EpochRecord> read_metrics_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read metrics file: " + path);
    std::vector<EpochRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(json::parse(line)));
    }
    return records;
}

MetricsSummary summarize_metrics(const std::vector<EpochRecord>& records) {
    MetricsSummary s;
    for (const EpochRecord& r : records) {
        for (const auto& [name, rate] : r.success) {
            if (std::find(s.eval_names.begin(), s.eval_names.end(), name) ==
                s.eval_names.end()) {
                s.eval_names.push_back(name);
            }
        }
    }
    s.baseline.assign(s.eval_names.size(), 0.0);
    s.final_rate.assign(s.eval_names.size(), 0.0);
    bool saw_baseline = false;
    for (const EpochRecord& r : records) {
        if (!r.evaluated) continue;
        for (size_t i = 0; i < s.eval_names.size(); ++i) {
            auto it = r.success.find(s.eval_names[i]);
            if (it == r.success.end()) continue;
            if (!saw_baseline) s.baseline[i] = it->second;
            s.final_rate[i] = it->second;
        }
        if (!s.eval_names.empty() && s.epochs_to_half < 0) {
            auto it = r.success.find(s.eval_names[0]);
            if (it != r.success.end() && it->second >= 0.5) s.epochs_to_half = r.epoch;
        }
        saw_baseline = true;
    }
    double density_sum = 0.0;
    int density_count = 0;
    bool any_inf = false;
    for (const EpochRecord& r : records) {
        if (!is_rl_algorithm(r.algorithm)) continue;
        if (std::isinf(r.density)) { any_inf = true; continue; }
        density_sum += r.density;
        ++density_count;
    }
    if (density_count > 0) s.mean_density = density_sum / density_count;
    else if (any_inf) s.mean_density = std::numeric_limits<double>::infinity();
    return s;
}

std::string format_run_summary_csv(const MetricsSummary& s) {
    std::ostringstream out;
    out << "eval_spec,baseline,final,uplift,epochs_to_half,mean_density\n";
    for (size_t i = 0; i < s.eval_names.size(); ++i) {
        out << s.eval_names[i] << "," << fmt(s.baseline[i]) << "," << fmt(s.final_rate[i])
            << "," << fmt(s.final_rate[i] - s.baseline[i]) << "," << s.epochs_to_half << ","
            << fmt(s.mean_density) << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

RunSummary execute_run(const RunDef& run, const std::string& dir) {
    RunSummary summary;
    summary.name = run.name;
    summary.row = run.row;
    fs::create_directories(dir);
    {
        std::ofstream cfg_out(dir + "/config.json", std::ios::binary);
        cfg_out << config_to_json(run.cfg).dump(2) << "\n";
    }
    std::ofstream metrics(dir + "/metrics.jsonl", std::ios::binary);
    std::ofstream timing(dir + "/timing.log", std::ios::binary);
    try {
        train::TrainResult result = train::train(
            run.cfg.train, run.train_specs, run.eval_specs,
            [&](const EpochRecord& rec) {
                metrics << record_to_json(rec).dump() << "\n";
                timing << "epoch " << rec.epoch << " " << rec.algorithm << " "
                       << rec.wall_seconds << "\n";
            },
            [&](const nets::Checkpoint& ckpt, int epoch) {
                const bool final_ckpt = epoch == run.cfg.train.epochs ||
                                        run.cfg.train.algorithm == train::Algorithm::SFT;
                const std::string path =
                    final_ckpt ? dir + "/checkpoint.ckpt"
                               : dir + "/checkpoint_epoch" + std::to_string(epoch) + ".ckpt";
                nets::save_checkpoint(ckpt, path);
            });
        metrics.flush();
        result.vocab.save(dir + "/vocab.txt");
        const MetricsSummary ms = summarize_metrics(result.records);
        {
            std::ofstream csv(dir + "/summary.csv", std::ios::binary);
            csv << format_run_summary_csv(ms);
        }
        summary.ok = true;
        summary.eval_names = ms.eval_names;
        summary.baseline = ms.baseline;
        summary.final_rate = ms.final_rate;
        summary.mean_density = ms.mean_density;
        summary.epochs_to_half = ms.epochs_to_half;
    } catch (const std::exception& e) {
        metrics.flush();
        summary.ok = false;
        summary.error = e.what();
        std::ofstream err(dir + "/error.txt", std::ios::binary);
        err << e.what() << "\n";
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

namespace {

std::vector<uint64_t> plan_seeds(const Config& cfg) {
    if (cfg.plan.contains("seeds")) {
        return cfg.plan.at("seeds").get<std::vector<uint64_t>>();
    }
    return {cfg.train.seed};
}

world::EnvSpec spec_from_woq(const Config& cfg, const std::string& woq, int budget_multiplier) {
    world::EnvSpec s = world::EnvSpec::parse_woq(woq);
    s.scheme = cfg.env.scheme;
    s.family = cfg.env.family;
    s.max_steps = budget_multiplier * s.quest_length;
    return s;
}

int budget_multiplier_of(const Config& cfg) {
    if (cfg.plan.contains("budget_multiplier")) {
        return cfg.plan.at("budget_multiplier").get<int>();
    }
    return 2;
}

std::vector<world::EnvSpec> seeded_specs(const world::EnvSpec& tmpl, uint64_t base, int n) {
    std::vector<world::EnvSpec> specs(n);
    for (int i = 0; i < n; ++i) {
        specs[i] = tmpl;
        specs[i].seed = base + static_cast<uint64_t>(i);
    }
    return specs;
}

void reject_unknown_plan_keys(const json& plan) {
    static const std::set<std::string> known = {
        "kind", "seeds", "specs", "budgets", "train_specs", "eval_specs",
        "include_mixed", "mixtures", "eval_families", "total_units", "sft_unit_cost",
        "splits", "harder_spec", "schemes", "algorithms", "parallel",
        "budget_multiplier"};
    for (auto it = plan.begin(); it != plan.end(); ++it) {
        if (!known.count(it.key())) {
            throw std::invalid_argument("unknown config key plan." + it.key());
        }
    }
}

} // namespace

void check_budget_split(int total_units, int sft_unit_cost, int n_sft, int n_rl) {
    if (total_units <= 0 || sft_unit_cost <= 0) {
        throw std::invalid_argument("budget and unit cost must be positive");
    }
    if (n_sft < 0 || n_rl < 0) throw std::invalid_argument("split counts must be >= 0");
    const long long cost =
        static_cast<long long>(n_sft) * sft_unit_cost + static_cast<long long>(n_rl);
    if (cost != total_units) {
        throw std::invalid_argument(
            "infeasible split: " + std::to_string(n_sft) + " sft * " +
            std::to_string(sft_unit_cost) + " + " + std::to_string(n_rl) +
            " rl = " + std::to_string(cost) + " != " + std::to_string(total_units));
    }
}

std::vector<RunDef> expand_plan(const Config& cfg) {
    if (!cfg.plan.contains("kind")) {
        throw std::invalid_argument("plan section needs a kind");
    }
    reject_unknown_plan_keys(cfg.plan);
    const PlanKind kind = plan_kind_from_string(cfg.plan.at("kind").get<std::string>());
    const std::vector<uint64_t> seeds = plan_seeds(cfg);
    const int mult = budget_multiplier_of(cfg);
    std::vector<RunDef> runs;

    auto base_run = [&](const std::string& name, uint64_t seed) {
        RunDef run;
        run.name = name + "_seed" + std::to_string(seed);
        run.cfg = cfg;
        run.cfg.train.seed = seed;
        run.row = json::object();
        run.row["seed"] = seed;
        return run;
    };
    auto default_tasks = [&](RunDef& run) {
        run.train_specs = seeded_specs(run.cfg.env, run.cfg.train_seed_base,
                                       run.cfg.train_tasks);
        run.eval_specs = seeded_specs(run.cfg.env, run.cfg.eval_seed_base,
                                      run.cfg.eval_count);
    };

    switch (kind) {
        case PlanKind::ComplexitySweep: {
            for (const std::string& woq :
                 cfg.plan.at("specs").get<std::vector<std::string>>()) {
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(woq, seed);
                    run.cfg.env = spec_from_woq(cfg, woq, mult);
                    default_tasks(run);
                    run.row["spec"] = woq;
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
        case PlanKind::ExplorationStudy: {
            for (int budget : cfg.plan.at("budgets").get<std::vector<int>>()) {
                for (uint64_t seed : seeds) {
                    RunDef run = base_run("steps" + std::to_string(budget), seed);
                    run.cfg.env.max_steps = budget;
                    default_tasks(run);
                    run.row["budget"] = budget;
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
        case PlanKind::GeneralizationMatrix: {
            const auto train_woqs = cfg.plan.at("train_specs").get<std::vector<std::string>>();
            const auto eval_woqs = cfg.plan.at("eval_specs").get<std::vector<std::string>>();
            auto eval_list = [&]() {
                std::vector<world::EnvSpec> evals;
                for (const std::string& woq : eval_woqs) {
                    const auto block = seeded_specs(spec_from_woq(cfg, woq, mult),
                                                    cfg.eval_seed_base, cfg.eval_count);
                    evals.insert(evals.end(), block.begin(), block.end());
                }
                return evals;
            };
            for (const std::string& woq : train_woqs) {
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(woq, seed);
                    run.cfg.env = spec_from_woq(cfg, woq, mult);
                    run.train_specs = seeded_specs(run.cfg.env, cfg.train_seed_base,
                                                   cfg.train_tasks);
                    run.eval_specs = eval_list();
                    run.row["train_spec"] = woq;
                    runs.push_back(std::move(run));
                }
            }
            if (cfg.plan.contains("include_mixed") &&
                cfg.plan.at("include_mixed").get<bool>()) {
                if (train_woqs.size() < 2) {
                    throw std::invalid_argument("mixed training needs two train specs");
                }
                // equal episode budget per constituent spec
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(train_woqs[0] + "+" + train_woqs[1], seed);
                    const world::EnvSpec a = spec_from_woq(cfg, train_woqs[0], mult);
                    const world::EnvSpec b = spec_from_woq(cfg, train_woqs[1], mult);
                    run.cfg.env = a;
                    run.train_specs.resize(cfg.train_tasks);
                    for (int i = 0; i < cfg.train_tasks; ++i) {
                        run.train_specs[i] = (i % 2 == 0) ? a : b;
                        run.train_specs[i].seed = cfg.train_seed_base + i;
                    }
                    run.eval_specs = eval_list();
                    run.row["train_spec"] = train_woqs[0] + "+" + train_woqs[1];
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
        case PlanKind::MixtureStudy: {
            const auto mixtures =
                cfg.plan.at("mixtures").get<std::vector<std::vector<std::string>>>();
            std::vector<std::string> eval_families = {"navigation", "mixed"};
            if (cfg.plan.contains("eval_families")) {
                eval_families = cfg.plan.at("eval_families").get<std::vector<std::string>>();
            }
            for (const auto& mixture : mixtures) {
                if (mixture.empty()) throw std::invalid_argument("empty mixture");
                std::string name = mixture[0];
                for (size_t i = 1; i < mixture.size(); ++i) name += "+" + mixture[i];
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(name, seed);
                    run.train_specs.resize(cfg.train_tasks);
                    // same data size for every mixture; families interleaved
                    for (int i = 0; i < cfg.train_tasks; ++i) {
                        world::EnvSpec s = cfg.env;
                        s.family = world::quest_family_from_string(
                            mixture[i % mixture.size()]);
                        s.seed = cfg.train_seed_base + static_cast<uint64_t>(i);
                        run.train_specs[i] = s;
                    }
                    for (const std::string& family : eval_families) {
                        world::EnvSpec e = cfg.env;
                        e.family = world::quest_family_from_string(family);
                        const auto block =
                            seeded_specs(e, cfg.eval_seed_base, cfg.eval_count);
                        run.eval_specs.insert(run.eval_specs.end(), block.begin(),
                                              block.end());
                    }
                    run.row["mixture"] = name;
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
        case PlanKind::BudgetAllocation: {
            const int total = cfg.plan.contains("total_units")
                                  ? cfg.plan.at("total_units").get<int>()
                                  : 1000;
            const int unit_cost = cfg.plan.contains("sft_unit_cost")
                                      ? cfg.plan.at("sft_unit_cost").get<int>()
                                      : 10;
            const auto splits =
                cfg.plan.at("splits").get<std::vector<std::vector<int>>>();
            const std::string harder = cfg.plan.at("harder_spec").get<std::string>();
            const world::EnvSpec harder_spec = spec_from_woq(cfg, harder, mult);
            for (const auto& split : splits) {
                if (split.size() != 2) {
                    throw std::invalid_argument("each split must be [n_sft, n_rl]");
                }
                check_budget_split(total, unit_cost, split[0], split[1]);
            }
            for (const auto& split : splits) {
                const int n_sft = split[0], n_rl = split[1];
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(
                        "sft" + std::to_string(n_sft) + "_rl" + std::to_string(n_rl), seed);
                    run.cfg.train.sft_demos = n_sft;
                    if (n_rl == 0) {
                        run.cfg.train.algorithm = train::Algorithm::SFT;
                        run.cfg.train.epochs = 0;
                    } else {
                        if (n_rl % run.cfg.train.batch_size != 0) {
                            throw std::invalid_argument(
                                "rl episode budget " + std::to_string(n_rl) +
                                " is not a multiple of batch_size " +
                                std::to_string(run.cfg.train.batch_size));
                        }
                        run.cfg.train.epochs = n_rl / run.cfg.train.batch_size;
                    }
                    run.train_specs = seeded_specs(run.cfg.env, cfg.train_seed_base,
                                                   cfg.train_tasks);
                    run.eval_specs = seeded_specs(run.cfg.env, cfg.eval_seed_base,
                                                  cfg.eval_count);
                    const auto harder_block =
                        seeded_specs(harder_spec, cfg.eval_seed_base, cfg.eval_count);
                    run.eval_specs.insert(run.eval_specs.end(), harder_block.begin(),
                                          harder_block.end());
                    run.row["sft_data"] = n_sft;
                    run.row["rl_episodes"] = n_rl;
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
        case PlanKind::DensityStudy: {
            for (const std::string& scheme :
                 cfg.plan.at("schemes").get<std::vector<std::string>>()) {
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(scheme, seed);
                    run.cfg.env.scheme = world::reward_scheme_from_string(scheme);
                    default_tasks(run);
                    run.row["scheme"] = scheme;
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
        case PlanKind::AlgorithmCompare: {
            for (const std::string& algo :
                 cfg.plan.at("algorithms").get<std::vector<std::string>>()) {
                for (uint64_t seed : seeds) {
                    RunDef run = base_run(algo, seed);
                    run.cfg.train.algorithm = train::algorithm_from_string(algo);
                    default_tasks(run);
                    run.row["algorithm"] = algo;
                    runs.push_back(std::move(run));
                }
            }
            break;
        }
    }
    return runs;
}

namespace {

std::vector<std::string> axis_columns(PlanKind kind) {
    switch (kind) {
        case PlanKind::ComplexitySweep: return {"spec", "seed"};
        case PlanKind::ExplorationStudy: return {"budget", "seed"};
        case PlanKind::GeneralizationMatrix: return {"train_spec", "seed"};
        case PlanKind::MixtureStudy: return {"mixture", "seed"};
        case PlanKind::BudgetAllocation: return {"sft_data", "rl_episodes", "seed"};
        case PlanKind::DensityStudy: return {"scheme", "seed"};
        case PlanKind::AlgorithmCompare: return {"algorithm", "seed"};
    }
    return {};
}

std::string cell_of(const json& row, const std::string& key) {
    if (!row.contains(key)) return "";
    const json& v = row.at(key);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::string plan_summary_csv(PlanKind kind, const std::vector<RunSummary>& summaries) {
    const std::vector<std::string> axes = axis_columns(kind);
    std::ostringstream out;
    out << "name,status";
    for (const std::string& a : axes) out << "," << a;
    out << ",eval_spec,baseline,final,uplift,mean_density,epochs_to_half\n";
    for (const RunSummary& s : summaries) {
        if (!s.ok) {
            out << s.name << ",failed";
            for (const std::string& a : axes) out << "," << cell_of(s.row, a);
            out << ",,,,,,\n";
            continue;
        }
        for (size_t i = 0; i < s.eval_names.size(); ++i) {
            out << s.name << ",ok";
            for (const std::string& a : axes) out << "," << cell_of(s.row, a);
            out << "," << s.eval_names[i] << "," << fmt(s.baseline[i]) << ","
                << fmt(s.final_rate[i]) << "," << fmt(s.final_rate[i] - s.baseline[i])
                << "," << fmt(s.mean_density) << "," << s.epochs_to_half << "\n";
        }
    }
    return out.str();
}

} // namespace

int run_plan(const Config& cfg, const std::string& out_dir) {
    const std::vector<RunDef> runs = expand_plan(cfg);
    fs::create_directories(out_dir);
    {
        std::ofstream pc(out_dir + "/plan_config.json", std::ios::binary);
        pc << config_to_json(cfg).dump(2) << "\n";
    }
    const int parallel =
        cfg.plan.contains("parallel") ? cfg.plan.at("parallel").get<int>() : 1;
    std::vector<RunSummary> summaries(runs.size());
    rollout::parallel_for(static_cast<int>(runs.size()), parallel, [&](int i) {
        const std::string dir = out_dir + "/runs/" + runs[i].name;
        summaries[i] = execute_run(runs[i], dir);
        std::ofstream row(dir + "/row.json", std::ios::binary);
        json r = runs[i].row;
        r["name"] = runs[i].name;
        r["ok"] = summaries[i].ok;
        row << r.dump() << "\n";
    });
    const PlanKind kind = plan_kind_from_string(cfg.plan.at("kind").get<std::string>());
    {
        std::ofstream csv(out_dir + "/plan_summary.csv", std::ios::binary);
        csv << plan_summary_csv(kind, summaries);
    }
    int failures = 0;
    std::ostringstream errlog;
    for (const RunSummary& s : summaries) {
        if (!s.ok) {
            ++failures;
            errlog << s.name << ": " << s.error << "\n";
        }
    }
    if (failures > 0) {
        std::ofstream err(out_dir + "/plan_errors.log", std::ios::binary);
        err << errlog.str();
    }
    return failures;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

DataKind data_kind_from_string(const std::string& s) {
    if (s == "rl") return DataKind::RL;
    if (s == "sft") return DataKind::SFTGold;
    if (s == "eval") return DataKind::Eval;
    throw std::invalid_argument("unknown data kind: " + s);
}

SeedRange reserved_range(DataKind kind) {
    switch (kind) {
        case DataKind::Eval: return {1, 30001};
        case DataKind::RL: return {30001, 40001};
        case DataKind::SFTGold: return {40001, 50001};
    }
    return {0, 0};
}

namespace {

const char* kind_name(DataKind k) {
    switch (k) {
        case DataKind::RL: return "rl";
        case DataKind::SFTGold: return "sft";
        case DataKind::Eval: return "eval";
    }
    return "";
}

std::string range_str(const SeedRange& r) {
    return "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + ")";
}

} // namespace

std::string gen_data(const world::EnvSpec& spec_template, int count, uint64_t seed_base,
                     DataKind kind, const std::string& out_dir) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    const SeedRange own = reserved_range(kind);
    const SeedRange request{seed_base, seed_base + static_cast<uint64_t>(count)};
    if (request.lo < own.lo || request.hi > own.hi) {
        for (DataKind other : {DataKind::Eval, DataKind::RL, DataKind::SFTGold}) {
            if (other == kind) continue;
            const SeedRange r = reserved_range(other);
            if (request.lo < r.hi && r.lo < request.hi) {
                throw std::invalid_argument(
                    std::string("requested ") + kind_name(kind) + " seeds " +
                    range_str(request) + " overlap the " + kind_name(other) +
                    " range " + range_str(r) + "; " + kind_name(kind) +
                    " seeds must stay in " + range_str(own));
            }
        }
        throw std::invalid_argument(std::string("requested ") + kind_name(kind) +
                                    " seeds " + range_str(request) +
                                    " fall outside the reserved range " + range_str(own));
    }
    fs::create_directories(out_dir);
    std::string path;
    if (kind == DataKind::SFTGold) {
        path = out_dir + "/gold.tsv";
        std::ofstream out(path, std::ios::binary);
        for (int i = 0; i < count; ++i) {
            world::EnvSpec s = spec_template;
            s.seed = seed_base + static_cast<uint64_t>(i);
            const world::World w = world::World::generate(s);
            out << s.compact_string();
            for (const std::string& cmd : w.gold()) out << "\t" << cmd;
            out << "\n";
        }
    } else {
        path = out_dir + (kind == DataKind::RL ? "/rl_specs.txt" : "/eval_specs.txt");
        std::ofstream out(path, std::ios::binary);
        for (int i = 0; i < count; ++i) {
            world::EnvSpec s = spec_template;
            s.seed = seed_base + static_cast<uint64_t>(i);
            out << s.compact_string() << "\n";
        }
    }
    return path;
}

std::vector<codec::EncodedHistory> load_gold_tsv(const std::string& path,
                                                 const codec::Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read gold file: " + path);
    std::vector<codec::EncodedHistory> histories;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, '\t')) fields.push_back(field);
        if (fields.size() < 2) throw std::runtime_error("bad gold record: " + line);
        const world::EnvSpec spec = world::EnvSpec::parse_compact(fields[0]);
        rollout::ScriptedActionSource source(vocab,
                                             {fields.begin() + 1, fields.end()});
        rollout::SamplingOptions opts;
        opts.max_context = 4096;
        const rollout::Trajectory traj = rollout::run_episode(spec, source, vocab, opts);
        if (!traj.success) {
            throw std::runtime_error("gold replay failed for record: " + fields[0]);
        }
        histories.push_back(traj.history);
    }
    return histories;
}

// ---------------------------------------------------------------------------
// Checkpoint evaluation and reporting
// ---------------------------------------------------------------------------

json eval_checkpoint(const Config& cfg, const std::string& checkpoint_path) {
    const codec::Vocabulary vocab = codec::Vocabulary::default_vocab();
    const nets::Checkpoint ckpt = nets::load_checkpoint(checkpoint_path, vocab.hash());
    nets::GruNet policy(ckpt.vocab_size, ckpt.d_embed, ckpt.d_hidden, ckpt.vocab_size);
    if (policy.param_count() != ckpt.policy_params.size()) {
        throw std::runtime_error("checkpoint policy shape mismatch");
    }
    policy.params() = ckpt.policy_params;
    rollout::SamplingOptions opts;
    opts.temperature = cfg.train.eval_temperature;
    opts.greedy = cfg.train.eval_greedy;
    opts.max_action_tokens = cfg.train.max_action_tokens;
    opts.max_context = cfg.train.max_context;
    const rollout::EvalResult result = rollout::evaluate(
        policy, vocab, cfg.eval_specs(), cfg.train.eval_episodes_per_spec, opts,
        cfg.train.parallelism, mix_seed(cfg.train.seed, 0xeba1));
    json out;
    out["overall"] = result.overall;
    out["episodes"] = result.episodes;
    json per = json::object();
    for (size_t i = 0; i < result.spec_names.size(); ++i) {
        per[result.spec_names[i]] = result.success_rates[i];
    }
    out["per_spec"] = per;
    return out;
}

namespace {

void write_chart_svg(const std::vector<EpochRecord>& records, const std::string& path) {
    // success-vs-epoch learning curves, one polyline per eval spec
    std::vector<std::string> names;
    for (const EpochRecord& r : records) {
        for (const auto& [name, _] : r.success) {
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                names.push_back(name);
            }
        }
    }
    if (names.size() > 4) names.resize(4);
    int max_epoch = 1;
    for (const EpochRecord& r : records) max_epoch = std::max(max_epoch, r.epoch);
    const double w = 640, h = 400, ml = 50, mb = 40, mt = 20, mr = 20;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
        << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << w / 2 << "\" y=\"" << h - 8
        << "\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
    svg << "<text x=\"14\" y=\"" << h / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << h / 2 << ")\">success rate</text>\n";
    for (size_t n = 0; n < names.size(); ++n) {
        std::ostringstream pts;
        for (const EpochRecord& r : records) {
            auto it = r.success.find(names[n]);
            if (it == r.success.end()) continue;
            const double x = ml + (w - ml - mr) * r.epoch / max_epoch;
            const double y = (h - mb) - (h - mb - mt) * it->second;
            pts << fmt(x) << "," << fmt(y) << " ";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << colors[n % 4]
            << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
        svg << "<text x=\"" << w - mr - 150 << "\" y=\"" << mt + 14 * (n + 1)
            << "\" font-size=\"11\" fill=\"" << colors[n % 4] << "\">" << names[n]
            << "</text>\n";
    }
    svg << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    out << svg.str();
}

void report_run_dir(const fs::path& dir, bool with_charts) {
    const std::vector<EpochRecord> records = read_metrics_file((dir / "metrics.jsonl").string());
    const MetricsSummary ms = summarize_metrics(records);
    std::ofstream csv(dir / "summary.csv", std::ios::binary);
    csv << format_run_summary_csv(ms);
    if (with_charts) write_chart_svg(records, (dir / "chart.svg").string());
}

} // namespace

void report(const std::string& dir, bool with_charts) {
    const fs::path root(dir);
    if (fs::exists(root / "metrics.jsonl")) {
        report_run_dir(root, with_charts);
        return;
    }
    if (!fs::exists(root / "plan_config.json")) {
        throw std::runtime_error("no metrics.jsonl or plan_config.json under " + dir);
    }
    const Config cfg = config::parse_config(
        config::load_json_file((root / "plan_config.json").string()));
    const PlanKind kind = plan_kind_from_string(cfg.plan.at("kind").get<std::string>());
    std::vector<fs::path> run_dirs;
    if (fs::exists(root / "runs")) {
        for (const auto& entry : fs::directory_iterator(root / "runs")) {
            if (entry.is_directory()) run_dirs.push_back(entry.path());
        }
    }
    std::sort(run_dirs.begin(), run_dirs.end());
    std::vector<RunSummary> summaries;
    for (const fs::path& rd : run_dirs) {
        RunSummary s;
        s.name = rd.filename().string();
        if (fs::exists(rd / "row.json")) {
            s.row = json::parse(std::ifstream(rd / "row.json"));
        }
        if (fs::exists(rd / "metrics.jsonl") && !fs::exists(rd / "error.txt")) {
            report_run_dir(rd, with_charts);
            const MetricsSummary ms =
                summarize_metrics(read_metrics_file((rd / "metrics.jsonl").string()));
            s.ok = true;
            s.eval_names = ms.eval_names;
            s.baseline = ms.baseline;
            s.final_rate = ms.final_rate;
            s.mean_density = ms.mean_density;
            s.epochs_to_half = ms.epochs_to_half;
        }
        summaries.push_back(std::move(s));
    }
    std::ofstream csv(root / "plan_summary.csv", std::ios::binary);
    csv << plan_summary_csv(kind, summaries);
}

} // namespace microturn::harness
