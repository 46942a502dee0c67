#ifndef MICROTURN_MICROWORLD_HPP_
#define MICROTURN_MICROWORLD_HPP_

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace microturn::world {

enum class RewardScheme { Sparse, DenseMilestone, DenseFine };
enum class QuestFamily { Navigation, Manipulation, Mixed };

std::string to_string(RewardScheme s);
std::string to_string(QuestFamily f);
RewardScheme reward_scheme_from_string(const std::string& s);
QuestFamily quest_family_from_string(const std::string& s);

// Environment parameterization. The "wK-oM-qN" string carries the complexity
// triple; seed/scheme/budget/family travel in the structured config section
// (or the compact form "wK-oM-qN;seed=..;scheme=..;steps=..;family=..").
struct EnvSpec {
    int world_size = 2;    // w: rooms
    int object_count = 3;  // o
    int quest_length = 4;  // q: gold solution length
    uint64_t seed = 0;
    RewardScheme scheme = RewardScheme::Sparse;
    int max_steps = 8;     // exploration budget
    QuestFamily family = QuestFamily::Mixed;

    std::string woq_string() const;                 // "w2-o3-q4"
    std::string compact_string() const;             // full round-trip form
    static EnvSpec parse_woq(const std::string&);   // complexity triple only
    static EnvSpec parse_compact(const std::string&);
    void validate() const;                          // throws std::invalid_argument

    bool operator==(const EnvSpec&) const = default;
};

struct StepOutcome {
    std::string observation;
    double reward = 0.0;
    bool done = false;
    bool milestone_hit = false;
    bool invalid_command = false;
};

enum class MilestoneKind { EnterRoom, TakeObject, DropObject, OpenObject };

struct Milestone {
    MilestoneKind kind;
    int target;  // room id for EnterRoom, object id otherwise
};

// Deterministic simulator for one generated task instance. Episode state is
// confined to the owning worker; generation itself is a pure function of the
// spec.
class World {
public:
    // Procedural generation; rejects unrealizable specs.
    static World generate(const EnvSpec& spec);

    // Returns the initial observation (quest objective + room description).
    std::string reset();

    // Applies one command. Throws std::logic_error if the episode is done.
    StepOutcome step(const std::string& command);

    // Exact set of commands whose step() would be valid in the current state.
    // Test oracle only; never surfaced to the agent.
    std::set<std::string> admissible_commands() const;

    const EnvSpec& spec() const { return spec_; }
    const std::vector<std::string>& gold() const { return gold_; }
    const std::string& objective_text() const { return objective_; }
    std::string look_text() const;
    int milestone_index() const { return milestone_idx_; }
    int step_count() const { return step_count_; }
    bool done() const { return done_; }
    bool quest_complete() const { return milestone_idx_ == spec_.quest_length; }
    int room_count() const { return static_cast<int>(exits_.size()); }
    int agent_room() const { return agent_room_; }
    const std::vector<std::string>& room_names() const { return room_names_; }
    const std::vector<std::string>& object_names() const { return object_names_; }

    // Byte stable description of generated content, for determinism checks.
    std::string layout_digest() const;

private:
    World() = default;

    struct Effect {
        enum class Kind { None, Moved, Took, Dropped, Opened, Examined } kind = Kind::None;
        int target = -1;   // room or object id
    };

    Effect apply(const std::string& command, std::string& message);
    double score_step(const Effect& effect, bool milestone_hit);
    std::string direction_into(int from, int to) const;

    EnvSpec spec_;

    // generated, immutable after generate()
    std::vector<std::array<int, 4>> exits_;  // exits_[room][dir] -> room or -1
    std::vector<std::string> room_names_;
    std::vector<std::string> object_names_;
    std::vector<bool> openable_;
    std::vector<bool> initially_closed_;
    std::vector<int> initial_location_;      // room id per object
    int start_room_ = 0;
    std::vector<Milestone> quest_;
    std::vector<std::string> gold_;
    std::string objective_;
    std::vector<bool> on_gold_path_;         // per room

    // episode state
    std::vector<int> location_;  // room id, or -1 for inventory
    std::vector<bool> open_;
    int agent_room_ = 0;
    int milestone_idx_ = 0;
    int step_count_ = 0;
    bool done_ = false;
    std::vector<bool> visited_;
    double fine_bonus_paid_ = 0.0;
};

// Mean environment steps between nonzero per-turn rewards over a batch:
// (total steps) / (count of nonzero rewards). Returns +inf when no trajectory
// carries any reward.
double measure_density(const std::vector<std::vector<double>>& per_turn_rewards);

// Directions shared by generator, parser, and renderer.
inline constexpr std::array<const char*, 4> kDirections = {"north", "south", "east", "west"};
inline constexpr int opposite_direction(int d) { return d ^ 1; }

} // namespace microturn::world

#endif // MICROTURN_MICROWORLD_HPP_
