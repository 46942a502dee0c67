#include "textcodec.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace microturn::codec {

const std::vector<std::string>& Vocabulary::special_strings() {
    static const std::vector<std::string> specials = {
        "<bos>", "<eos>", "<user>", "</user>", "<asst>", "</asst>", "<unk>", "<pad>"};
    return specials;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    v.tokens_ = special_strings();
    for (const std::string& w : words) {
        if (w.empty() || w.front() == '<') {
            throw std::invalid_argument("bad vocabulary word: " + w);
        }
        if (v.word_ids_.count(w)) {
            throw std::invalid_argument("duplicate vocabulary word: " + w);
        }
        v.word_ids_[w] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(w);
    }
    return v;
}

Vocabulary Vocabulary::default_vocab() {
    std::vector<std::string> words = {
        // template
        "your", "task", "is", "state", "action",
        // verbs and directions
        "go", "take", "drop", "open", "examine",
        "north", "south", "east", "west",
        // environment messages
        "quest", "reach", "then", "you", "are", "in", "exits", "see", "carry",
        "nothing", "that", "not", "a", "verb", "i", "know", "can", "do",
        "special", "complete",
        // punctuation
        ".", ":", ",",
    };
    const char* room_adj[] = {"white", "blue", "green", "red",
                              "dusty", "quiet", "narrow", "bright"};
    const char* room_noun[] = {"hall", "chamber", "study", "cellar",
                               "attic", "parlor", "kitchen", "garden"};
    const char* obj_mat[] = {"brass", "iron", "oak", "silver",
                             "copper", "glass", "stone", "wooden"};
    const char* obj_noun[] = {"key", "box", "lamp", "coin",
                              "book", "bell", "jar", "rope"};
    for (const char* w : room_adj) words.push_back(w);
    for (const char* w : room_noun) words.push_back(w);
    for (const char* w : obj_mat) words.push_back(w);
    for (const char* w : obj_noun) words.push_back(w);
    for (char d = '0'; d <= '9'; ++d) words.push_back(std::string(1, d));
    return from_words(words);
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
    std::vector<int> ids;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        auto it = word_ids_.find(word);
        ids.push_back(it == word_ids_.end() ? kUnk : it->second);
    }
    return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += tokens_.at(ids[i]);
    }
    return out;
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& t : tokens_) {
        for (char c : t) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= '\n';
        h *= 0x100000001b3ULL;
    }
    return h;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    for (const std::string& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.size() < kSpecialCount) {
        throw std::runtime_error("vocabulary file too short: " + path);
    }
    for (int i = 0; i < kSpecialCount; ++i) {
        if (lines[i] != special_strings()[i]) {
            throw std::runtime_error("vocabulary file is missing the special header block");
        }
    }
    return from_words({lines.begin() + kSpecialCount, lines.end()});
}

// ---------------------------------------------------------------------------
// Chat template
// ---------------------------------------------------------------------------

namespace {

void push_template(EncodedHistory& h, const std::vector<int>& ids, int turn_index) {
    for (int id : ids) {
        h.tokens.push_back(id);
        h.role.push_back(Role::StateOrTemplate);
        h.turn.push_back(turn_index);
    }
}

void push_user_segment(EncodedHistory& h, const Vocabulary& v, const std::string& body,
                       int turn_index) {
    push_template(h, {Vocabulary::kUserOpen}, turn_index);
    push_template(h, v.encode(body), turn_index);
    push_template(h, {Vocabulary::kUserClose, Vocabulary::kAsstOpen}, turn_index);
}

} // namespace

void EncodedHistory::begin(const Vocabulary& v, const std::string& task_prompt,
                           const std::string& state0) {
    tokens.clear(); role.clear(); turn.clear(); action_positions.clear();
    completed_turns = 0;
    push_template(*this, {Vocabulary::kBos}, 0);
    push_user_segment(*this, v,
                      "your task is : " + task_prompt + " state : " + state0 +
                          " your action :",
                      0);
    pending = true;
}

void EncodedHistory::append_action(const Vocabulary& v, const std::vector<int>& action_tokens) {
    (void)v;
    if (!pending) throw std::logic_error("append_action without a pending turn");
    if (action_tokens.empty() || action_tokens.back() != Vocabulary::kEosAction) {
        throw std::logic_error("action must end with the eos action token");
    }
    for (size_t i = 0; i + 1 < action_tokens.size(); ++i) {
        if (action_tokens[i] == Vocabulary::kEosAction) {
            throw std::logic_error("eos action token may only terminate an action");
        }
    }
    for (size_t i = 0; i < action_tokens.size(); ++i) {
        const bool is_eos = i + 1 == action_tokens.size();
        action_positions.push_back(static_cast<int>(tokens.size()));
        tokens.push_back(action_tokens[i]);
        role.push_back(is_eos ? Role::ActionEos : Role::Action);
        turn.push_back(completed_turns);
    }
    ++completed_turns;
    pending = false;
}

void EncodedHistory::append_state(const Vocabulary& v, const std::string& state_text) {
    if (pending) throw std::logic_error("append_state while a turn is pending");
    push_user_segment(*this, v, "state : " + state_text + " your action :", completed_turns);
    pending = true;
}

int EncodedHistory::state_segment_length(const Vocabulary& v, const std::string& state_text) {
    // <user> body </user> <asst>
    return 3 + static_cast<int>(v.encode("state : " + state_text + " your action :").size());
}

EncodedHistory render_history(const Vocabulary& v, const std::string& task_prompt,
                              const std::vector<Turn>& turns) {
    EncodedHistory h;
    if (turns.empty()) {
        // prompt-only history: a single pending turn with an empty state
        h.begin(v, task_prompt, "");
        return h;
    }
    h.begin(v, task_prompt, turns[0].state_text);
    for (size_t t = 0; t < turns.size(); ++t) {
        if (t > 0) h.append_state(v, turns[t].state_text);
        if (turns[t].action_tokens) {
            h.append_action(v, *turns[t].action_tokens);
        } else if (t + 1 != turns.size()) {
            throw std::logic_error("only the last turn may be pending");
        }
    }
    return h;
}

std::vector<double> reward_vector(const EncodedHistory& history,
                                  const std::vector<double>& turn_rewards) {
    if (static_cast<int>(turn_rewards.size()) != history.completed_turns) {
        throw std::logic_error("turn_rewards length must equal completed turns");
    }
    std::vector<double> out(history.tokens.size(), 0.0);
    for (size_t i = 0; i < history.tokens.size(); ++i) {
        if (history.role[i] == Role::ActionEos) {
            out[i] = turn_rewards[history.turn[i]];
        }
    }
    return out;
}

} // namespace microturn::codec
