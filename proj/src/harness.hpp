#ifndef MICROTURN_HARNESS_HPP_
#define MICROTURN_HARNESS_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "microworld.hpp"
#include "trainers.hpp"

namespace microturn::harness {

enum class PlanKind {
    ComplexitySweep,
    ExplorationStudy,
    GeneralizationMatrix,
    MixtureStudy,
    BudgetAllocation,
    DensityStudy,
    AlgorithmCompare,
};

PlanKind plan_kind_from_string(const std::string& s);
std::string to_string(PlanKind k);

// One training run of a plan: resolved config plus explicit task lists.
struct RunDef {
    std::string name;
    config::Config cfg;
    std::vector<world::EnvSpec> train_specs;
    std::vector<world::EnvSpec> eval_specs;
    nlohmann::json row;  // axis values for the plan summary
};

struct RunSummary {
    std::string name;
    bool ok = false;
    std::string error;
    nlohmann::json row;
    // per eval spec
    std::vector<std::string> eval_names;
    std::vector<double> baseline, final_rate;
    double mean_density = 0.0;
    int epochs_to_half = -1;  // first epoch with in-spec success >= 0.5
};

// Executes one training run and writes config.json, vocab.txt,
// metrics.jsonl, timing.log, summary.csv and checkpoint.ckpt into `dir`.
RunSummary execute_run(const RunDef& run, const std::string& dir);

// Expands the plan section of the config into concrete runs.
std::vector<RunDef> expand_plan(const config::Config& cfg);

// Runs a whole plan; returns the number of failed runs. Failures are
// recorded and the plan continues.
int run_plan(const config::Config& cfg, const std::string& out_dir);

// SFT/RL budget split feasibility: n_sft * unit_cost + n_rl == total.
void check_budget_split(int total_units, int sft_unit_cost, int n_sft, int n_rl);

enum class DataKind { RL, SFTGold, Eval };
DataKind data_kind_from_string(const std::string& s);

// Reserved seed blocks per data kind; requests outside the kind's block are
// rejected with both ranges named.
struct SeedRange { uint64_t lo = 0, hi = 0; };  // [lo, hi)
SeedRange reserved_range(DataKind kind);

// Emits dataset files into out_dir: rl_specs.txt / eval_specs.txt (one
// compact env string per line) or gold.tsv (compact spec + tab-separated
// gold commands per line).
std::string gen_data(const world::EnvSpec& spec_template, int count, uint64_t seed_base,
                     DataKind kind, const std::string& out_dir);

// Reads the gold export and renders each episode through the chat template.
std::vector<codec::EncodedHistory> load_gold_tsv(const std::string& path,
                                                 const codec::Vocabulary& vocab);

// Evaluates a checkpoint on the config's eval specs; returns a JSON result.
nlohmann::json eval_checkpoint(const config::Config& cfg, const std::string& checkpoint_path);

// Rebuilds summary CSVs from the metrics files under `dir` (a run directory
// or a plan directory); optionally renders SVG learning curves.
void report(const std::string& dir, bool with_charts);

// Rebuilt-from-metrics per-run summary rows; used by report and the
// recomputation checks.
struct MetricsSummary {
    std::vector<std::string> eval_names;
    std::vector<double> baseline, final_rate;
    double mean_density = 0.0;
    int epochs_to_half = -1;
};
MetricsSummary summarize_metrics(const std::vector<train::EpochRecord>& records);
std::vector<train::EpochRecord> read_metrics_file(const std::string& path);
std::string format_run_summary_csv(const MetricsSummary& s);

} // namespace microturn::harness

#endif // MICROTURN_HARNESS_HPP_
