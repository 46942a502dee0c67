#include "microworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rng.hpp"

namespace microturn::world {

namespace {

const std::array<const char*, 8> kRoomAdjectives = {
    "white", "blue", "green", "red", "dusty", "quiet", "narrow", "bright"};
const std::array<const char*, 8> kRoomNouns = {
    "hall", "chamber", "study", "cellar", "attic", "parlor", "kitchen", "garden"};
const std::array<const char*, 8> kObjectMaterials = {
    "brass", "iron", "oak", "silver", "copper", "glass", "stone", "wooden"};
const std::array<const char*, 8> kObjectNouns = {
    "key", "box", "lamp", "coin", "book", "bell", "jar", "rope"};

constexpr int kMaxNames = 64;  // 8 x 8 pairs per pool

std::vector<std::string> pick_names(Rng& rng, int count,
                                    const std::array<const char*, 8>& first,
                                    const std::array<const char*, 8>& second) {
    std::vector<int> combos(kMaxNames);
    std::iota(combos.begin(), combos.end(), 0);
    rng.shuffle(combos);
    std::vector<std::string> names;
    names.reserve(count);
    for (int i = 0; i < count; ++i) {
        names.push_back(std::string(first[combos[i] / 8]) + " " + second[combos[i] % 8]);
    }
    return names;
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    bool unite(int a, int b) {
        a = find(a); b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

} // namespace

std::string to_string(RewardScheme s) {
    switch (s) {
        case RewardScheme::Sparse: return "sparse";
        case RewardScheme::DenseMilestone: return "dense_milestone";
        case RewardScheme::DenseFine: return "dense_fine";
    }
    return "sparse";
}

std::string to_string(QuestFamily f) {
    switch (f) {
        case QuestFamily::Navigation: return "navigation";
        case QuestFamily::Manipulation: return "manipulation";
        case QuestFamily::Mixed: return "mixed";
    }
    return "mixed";
}

RewardScheme reward_scheme_from_string(const std::string& s) {
    if (s == "sparse") return RewardScheme::Sparse;
    if (s == "dense_milestone") return RewardScheme::DenseMilestone;
    if (s == "dense_fine") return RewardScheme::DenseFine;
    throw std::invalid_argument("unknown reward scheme: " + s);
}

QuestFamily quest_family_from_string(const std::string& s) {
    if (s == "navigation") return QuestFamily::Navigation;
    if (s == "manipulation") return QuestFamily::Manipulation;
    if (s == "mixed") return QuestFamily::Mixed;
    throw std::invalid_argument("unknown quest family: " + s);
}

std::string EnvSpec::woq_string() const {
    std::ostringstream out;
    out << "w" << world_size << "-o" << object_count << "-q" << quest_length;
    return out.str();
}

std::string EnvSpec::compact_string() const {
    std::ostringstream out;
    out << woq_string() << ";seed=" << seed << ";scheme=" << to_string(scheme)
        << ";steps=" << max_steps << ";family=" << to_string(family);
    return out.str();
}

EnvSpec EnvSpec::parse_woq(const std::string& text) {
    EnvSpec spec;
    int w = 0, o = 0, q = 0;
    char dash1 = 0, dash2 = 0, cw = 0, co = 0, cq = 0;
    std::istringstream in(text);
    in >> cw >> w >> dash1 >> co >> o >> dash2 >> cq >> q;
    if (in.fail() || !in.eof() || cw != 'w' || co != 'o' || cq != 'q' ||
        dash1 != '-' || dash2 != '-') {
        throw std::invalid_argument("cannot parse environment string: " + text);
    }
    spec.world_size = w;
    spec.object_count = o;
    spec.quest_length = q;
    spec.max_steps = 2 * q;
    return spec;
}

EnvSpec EnvSpec::parse_compact(const std::string& text) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(text);
    while (std::getline(in, field, ';')) fields.push_back(field);
    if (fields.empty()) throw std::invalid_argument("empty environment string");
    EnvSpec spec = parse_woq(fields[0]);
    for (size_t i = 1; i < fields.size(); ++i) {
        auto eq = fields[i].find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("bad environment field: " + fields[i]);
        }
        std::string key = fields[i].substr(0, eq);
        std::string value = fields[i].substr(eq + 1);
        if (key == "seed") spec.seed = std::stoull(value);
        else if (key == "scheme") spec.scheme = reward_scheme_from_string(value);
        else if (key == "steps") spec.max_steps = std::stoi(value);
        else if (key == "family") spec.family = quest_family_from_string(value);
        else throw std::invalid_argument("unknown environment field: " + key);
    }
    return spec;
}

void EnvSpec::validate() const {
    if (world_size < 1) throw std::invalid_argument("world_size must be >= 1");
    if (object_count < 0) throw std::invalid_argument("object_count must be >= 0");
    if (quest_length < 1) throw std::invalid_argument("quest_length must be >= 1");
    if (max_steps < quest_length) {
        throw std::invalid_argument("max_steps must be >= quest_length");
    }
    if (world_size > kMaxNames || object_count > kMaxNames) {
        throw std::invalid_argument("name pool supports at most 64 rooms/objects");
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

World World::generate(const EnvSpec& spec) {
    spec.validate();
    const int w = spec.world_size;
    const int o = spec.object_count;
    const int q = spec.quest_length;

    // Family realizability. Manipulation milestones never repeat a
    // (verb, object) pair, so one object yields at most open+take+drop.
    if (spec.family == QuestFamily::Navigation && w < 2) {
        throw std::invalid_argument("navigation quest needs at least 2 rooms");
    }
    if (spec.family == QuestFamily::Manipulation && o * 3 < q) {
        throw std::invalid_argument("too few objects for a manipulation quest of length " +
                                    std::to_string(q));
    }
    if (spec.family == QuestFamily::Mixed && (w < 2 || o < 1)) {
        throw std::invalid_argument("mixed quest needs at least 2 rooms and 1 object");
    }

    World world;
    world.spec_ = spec;
    Rng rng(mix_seed(spec.seed, 0x6d6963726f745251ULL));

    // Room graph: random spanning tree over a grid of w cells plus up to
    // floor(w/4) extra grid edges. Grid adjacency keeps exits <= 4 and gives
    // consistent compass inverses.
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(w))));
    world.exits_.assign(w, {-1, -1, -1, -1});
    struct Edge { int a, b, dir_from_a; };
    std::vector<Edge> edges;
    for (int r = 0; r < w; ++r) {
        const int row = r / cols, col = r % cols;
        const int east = r + 1;
        if (col + 1 < cols && east < w) edges.push_back({r, east, 2});
        const int south = r + cols;
        if (south < w) edges.push_back({r, south, 1});
    }
    rng.shuffle(edges);
    DisjointSet dsu(w);
    std::vector<Edge> leftovers;
    for (const Edge& e : edges) {
        if (dsu.unite(e.a, e.b)) {
            world.exits_[e.a][e.dir_from_a] = e.b;
            world.exits_[e.b][opposite_direction(e.dir_from_a)] = e.a;
        } else {
            leftovers.push_back(e);
        }
    }
    int extras = w / 4;
    for (const Edge& e : leftovers) {
        if (extras-- <= 0) break;
        world.exits_[e.a][e.dir_from_a] = e.b;
        world.exits_[e.b][opposite_direction(e.dir_from_a)] = e.a;
    }

    world.room_names_ = pick_names(rng, w, kRoomAdjectives, kRoomNouns);
    world.object_names_ = pick_names(rng, o, kObjectMaterials, kObjectNouns);
    world.openable_.assign(o, false);
    world.initially_closed_.assign(o, false);
    world.initial_location_.assign(o, -2);  // -2: not yet placed
    world.start_room_ = rng.next_int(w);

    // Quest construction walks a simulated gold agent. Objects are placed
    // lazily in the room where the quest first touches them.
    struct ObjSim { bool placed = false; bool held = false; int room = -1;
                    bool took = false, dropped = false, opened = false; };
    std::vector<ObjSim> objs(o);
    int sim_room = world.start_room_;
    int prev_room = -1;
    std::vector<bool> gold_rooms(w, false);
    gold_rooms[world.start_room_] = true;

    auto nav_candidates = [&]() {
        std::vector<int> dirs;
        for (int d = 0; d < 4; ++d) {
            if (world.exits_[sim_room][d] >= 0) dirs.push_back(d);
        }
        // avoid an immediate backtrack when another exit exists
        if (dirs.size() > 1) {
            std::vector<int> filtered;
            for (int d : dirs) {
                if (world.exits_[sim_room][d] != prev_room) filtered.push_back(d);
            }
            if (!filtered.empty()) dirs = filtered;
        }
        return dirs;
    };

    struct ManipAction { MilestoneKind kind; int obj; };
    auto manip_candidates = [&]() {
        std::vector<ManipAction> acts;
        for (int i = 0; i < o; ++i) {
            ObjSim& s = objs[i];
            const bool in_room = s.placed ? (!s.held && s.room == sim_room) : true;
            if (in_room && !s.took) acts.push_back({MilestoneKind::TakeObject, i});
            if (s.placed && s.held && !s.dropped) acts.push_back({MilestoneKind::DropObject, i});
            if (in_room && !s.opened) acts.push_back({MilestoneKind::OpenObject, i});
        }
        return acts;
    };

    auto place_if_needed = [&](int obj) {
        if (!objs[obj].placed) {
            objs[obj].placed = true;
            objs[obj].room = sim_room;
            world.initial_location_[obj] = sim_room;
        }
    };

    for (int m = 0; m < q; ++m) {
        bool use_nav;
        auto manip = manip_candidates();
        switch (spec.family) {
            case QuestFamily::Navigation: use_nav = true; break;
            case QuestFamily::Manipulation: use_nav = false; break;
            default: use_nav = manip.empty() ? true : (rng.next_int(2) == 0); break;
        }
        if (!use_nav && manip.empty()) use_nav = true;  // manip capacity exhausted
        if (use_nav) {
            auto dirs = nav_candidates();
            const int d = dirs[rng.next_int(static_cast<int>(dirs.size()))];
            const int next = world.exits_[sim_room][d];
            world.quest_.push_back({MilestoneKind::EnterRoom, next});
            world.gold_.push_back(std::string("go ") + kDirections[d]);
            prev_room = sim_room;
            sim_room = next;
            gold_rooms[next] = true;
        } else {
            const ManipAction act = manip[rng.next_int(static_cast<int>(manip.size()))];
            place_if_needed(act.obj);
            ObjSim& s = objs[act.obj];
            const std::string& name = world.object_names_[act.obj];
            switch (act.kind) {
                case MilestoneKind::TakeObject:
                    s.took = true; s.held = true;
                    world.gold_.push_back("take " + name);
                    break;
                case MilestoneKind::DropObject:
                    s.dropped = true; s.held = false; s.room = sim_room;
                    world.gold_.push_back("drop " + name);
                    break;
                case MilestoneKind::OpenObject:
                    s.opened = true;
                    world.openable_[act.obj] = true;
                    world.initially_closed_[act.obj] = true;
                    world.gold_.push_back("open " + name);
                    break;
                default: break;
            }
            world.quest_.push_back({act.kind, act.obj});
        }
    }

    // Scatter the untouched objects.
    for (int i = 0; i < o; ++i) {
        if (world.initial_location_[i] == -2) {
            world.initial_location_[i] = rng.next_int(w);
        }
    }
    world.on_gold_path_ = gold_rooms;

    std::vector<std::string> phrases;
    for (const Milestone& m : world.quest_) {
        switch (m.kind) {
            case MilestoneKind::EnterRoom:
                phrases.push_back("reach " + world.room_names_[m.target]); break;
            case MilestoneKind::TakeObject:
                phrases.push_back("take " + world.object_names_[m.target]); break;
            case MilestoneKind::DropObject:
                phrases.push_back("drop " + world.object_names_[m.target]); break;
            case MilestoneKind::OpenObject:
                phrases.push_back("open " + world.object_names_[m.target]); break;
        }
    }
    world.objective_ = "quest : " + join(phrases, " then ") + " .";

    world.reset();
    return world;
}

// ---------------------------------------------------------------------------
// Episode dynamics
// ---------------------------------------------------------------------------

std::string World::reset() {
    location_ = initial_location_;
    open_.assign(openable_.size(), false);
    for (size_t i = 0; i < openable_.size(); ++i) open_[i] = !initially_closed_[i];
    agent_room_ = start_room_;
    milestone_idx_ = 0;
    step_count_ = 0;
    done_ = false;
    visited_.assign(exits_.size(), false);
    visited_[start_room_] = true;
    fine_bonus_paid_ = 0.0;
    return objective_ + " " + look_text();
}

std::string World::look_text() const {
    std::ostringstream out;
    out << "you are in " << room_names_[agent_room_] << " . exits :";
    for (int d = 0; d < 4; ++d) {
        if (exits_[agent_room_][d] >= 0) out << " " << kDirections[d];
    }
    out << " . you see :";
    bool any = false;
    for (size_t i = 0; i < location_.size(); ++i) {
        if (location_[i] == agent_room_) {
            out << (any ? " , " : " ") << object_names_[i];
            any = true;
        }
    }
    if (!any) out << " nothing";
    out << " . you carry :";
    any = false;
    for (size_t i = 0; i < location_.size(); ++i) {
        if (location_[i] == -1) {
            out << (any ? " , " : " ") << object_names_[i];
            any = true;
        }
    }
    if (!any) out << " nothing";
    out << " .";
    return out.str();
}

World::Effect World::apply(const std::string& command, std::string& message) {
    const std::vector<std::string> words = split_words(command);
    if (words.empty()) {
        message = "that is not a verb i know .";
        return {};
    }
    const std::string& verb = words[0];
    const std::string rest = join({words.begin() + 1, words.end()}, " ");

    auto object_id = [&](const std::string& name) -> int {
        for (size_t i = 0; i < object_names_.size(); ++i) {
            if (object_names_[i] == name) return static_cast<int>(i);
        }
        return -1;
    };

    if (verb == "go") {
        int dir = -1;
        for (int d = 0; d < 4; ++d) {
            if (rest == kDirections[d]) dir = d;
        }
        if (dir < 0) {
            message = "that is not a verb i know .";
            return {};
        }
        const int next = exits_[agent_room_][dir];
        if (next < 0) {
            message = "you can not do that .";
            return {};
        }
        agent_room_ = next;
        message = "you go " + rest + " . " + look_text();
        return {Effect::Kind::Moved, next};
    }
    if (verb == "take" || verb == "drop" || verb == "open" || verb == "examine") {
        const int obj = object_id(rest);
        if (obj < 0) {
            message = "that is not a verb i know .";
            return {};
        }
        if (verb == "take") {
            if (location_[obj] != agent_room_) {
                message = "you can not do that .";
                return {};
            }
            location_[obj] = -1;
            message = "you take " + rest + " . " + look_text();
            return {Effect::Kind::Took, obj};
        }
        if (verb == "drop") {
            if (location_[obj] != -1) {
                message = "you can not do that .";
                return {};
            }
            location_[obj] = agent_room_;
            message = "you drop " + rest + " . " + look_text();
            return {Effect::Kind::Dropped, obj};
        }
        if (verb == "open") {
            if (location_[obj] != agent_room_ || !openable_[obj] || open_[obj]) {
                message = "you can not do that .";
                return {};
            }
            open_[obj] = true;
            message = "you open " + rest + " . " + look_text();
            return {Effect::Kind::Opened, obj};
        }
        // examine
        if (location_[obj] != agent_room_ && location_[obj] != -1) {
            message = "you can not do that .";
            return {};
        }
        message = "you examine " + rest + " . nothing special .";
        return {Effect::Kind::Examined, obj};
    }
    message = "that is not a verb i know .";
    return {};
}

double World::score_step(const Effect& effect, bool milestone_hit) {
    const double q = spec_.quest_length;
    double reward = 0.0;
    switch (spec_.scheme) {
        case RewardScheme::Sparse:
            if (milestone_hit && milestone_idx_ == spec_.quest_length) reward = 1.0;
            break;
        case RewardScheme::DenseMilestone:
            if (milestone_hit) reward = 1.0 / q;
            break;
        case RewardScheme::DenseFine:
            if (milestone_hit) reward += 1.0 / q;
            if (effect.kind == Effect::Kind::Moved && on_gold_path_[effect.target] &&
                !visited_[effect.target]) {
                const double bonus = 1.0 / (4.0 * q);
                if (fine_bonus_paid_ + bonus <= 0.25 + 1e-12) {
                    fine_bonus_paid_ += bonus;
                    reward += bonus;
                }
            }
            break;
    }
    return reward;
}

StepOutcome World::step(const std::string& command) {
    if (done_) throw std::logic_error("step() on a finished episode");
    ++step_count_;

    StepOutcome out;
    std::string message;
    const Effect effect = apply(command, message);
    out.invalid_command = effect.kind == Effect::Kind::None;

    if (!out.invalid_command && milestone_idx_ < spec_.quest_length) {
        const Milestone& next = quest_[milestone_idx_];
        const bool matches =
            (next.kind == MilestoneKind::EnterRoom && effect.kind == Effect::Kind::Moved &&
             effect.target == next.target) ||
            (next.kind == MilestoneKind::TakeObject && effect.kind == Effect::Kind::Took &&
             effect.target == next.target) ||
            (next.kind == MilestoneKind::DropObject && effect.kind == Effect::Kind::Dropped &&
             effect.target == next.target) ||
            (next.kind == MilestoneKind::OpenObject && effect.kind == Effect::Kind::Opened &&
             effect.target == next.target);
        if (matches) {
            ++milestone_idx_;
            out.milestone_hit = true;
        }
    }

    out.reward = score_step(effect, out.milestone_hit);
    if (effect.kind == Effect::Kind::Moved) visited_[effect.target] = true;

    if (quest_complete()) {
        done_ = true;
        message += " you complete the quest .";
    } else if (step_count_ >= spec_.max_steps) {
        done_ = true;
    }
    out.done = done_;
    out.observation = message;
    return out;
}

std::set<std::string> World::admissible_commands() const {
    std::set<std::string> cmds;
    for (int d = 0; d < 4; ++d) {
        if (exits_[agent_room_][d] >= 0) cmds.insert(std::string("go ") + kDirections[d]);
    }
    for (size_t i = 0; i < location_.size(); ++i) {
        const std::string& name = object_names_[i];
        if (location_[i] == agent_room_) {
            cmds.insert("take " + name);
            cmds.insert("examine " + name);
            if (openable_[i] && !open_[i]) cmds.insert("open " + name);
        } else if (location_[i] == -1) {
            cmds.insert("drop " + name);
            cmds.insert("examine " + name);
        }
    }
    return cmds;
}

std::string World::layout_digest() const {
    std::ostringstream out;
    out << spec_.compact_string() << "|start=" << start_room_ << "|rooms=";
    for (size_t r = 0; r < exits_.size(); ++r) {
        out << room_names_[r] << "[";
        for (int d = 0; d < 4; ++d) out << exits_[r][d] << (d < 3 ? "," : "]");
    }
    out << "|objects=";
    for (size_t i = 0; i < object_names_.size(); ++i) {
        out << object_names_[i] << "@" << initial_location_[i]
            << (initially_closed_[i] ? "(closed)" : "") << ";";
    }
    out << "|gold=";
    for (const auto& g : gold_) out << g << ";";
    return out.str();
}

double measure_density(const std::vector<std::vector<double>>& per_turn_rewards) {
    if (per_turn_rewards.empty()) {
        throw std::invalid_argument("measure_density needs at least one trajectory");
    }
    long long steps = 0, nonzero = 0;
    for (const auto& traj : per_turn_rewards) {
        steps += static_cast<long long>(traj.size());
        for (double r : traj) {
            if (r != 0.0) ++nonzero;
        }
    }
    if (nonzero == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(steps) / static_cast<double>(nonzero);
}

} // namespace microturn::world
