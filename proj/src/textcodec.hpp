#ifndef MICROTURN_TEXTCODEC_HPP_
#define MICROTURN_TEXTCODEC_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace microturn::codec {

// Closed word-level vocabulary. Specials occupy a fixed header block
// (ids 0..7) and are never produced by encoding environment text.
class Vocabulary {
public:
    Vocabulary() = default;  // empty; populate via from_words/default_vocab/load

    static constexpr int kBos = 0;
    static constexpr int kEosAction = 1;  // per-action terminator; carries the turn reward
    static constexpr int kUserOpen = 2;
    static constexpr int kUserClose = 3;
    static constexpr int kAsstOpen = 4;
    static constexpr int kAsstClose = 5;
    static constexpr int kUnk = 6;
    static constexpr int kPad = 7;
    static constexpr int kSpecialCount = 8;

    static const std::vector<std::string>& special_strings();

    // Specials plus the given words, in order. Duplicate or special-looking
    // words are rejected.
    static Vocabulary from_words(const std::vector<std::string>& words);

    // Covers the full microworld surface: template words, environment
    // messages, name pools, digits, punctuation.
    static Vocabulary default_vocab();

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_.at(id); }
    bool is_special(int id) const { return id < kSpecialCount; }

    // Word-level greedy tokenization; unknown words map to UNK.
    std::vector<int> encode(const std::string& text) const;
    // Inverse of encode on in-vocabulary text (single-space join).
    std::string decode(const std::vector<int>& ids) const;

    // FNV-1a over the token list; checkpoints refuse a mismatch.
    uint64_t hash() const;

    // One token per line, line number = id, specials first.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> word_ids_;  // excludes specials
};

enum class Role : uint8_t { StateOrTemplate = 0, Action = 1, ActionEos = 2 };

// One (state, action) exchange. Actions are stored as token ids (the
// sampler's output, terminator included); gold data encodes command text.
struct Turn {
    std::string state_text;
    std::optional<std::vector<int>> action_tokens;  // ends with kEosAction
};

struct EncodedHistory {
    std::vector<int> tokens;
    std::vector<Role> role;
    std::vector<int> turn;              // turn index per token
    std::vector<int> action_positions;  // positions of Action/ActionEos tokens
    int completed_turns = 0;
    bool pending = false;               // open assistant slot at the end

    // Incremental building; the sequence is append-only across a rollout.
    void begin(const Vocabulary& v, const std::string& task_prompt,
               const std::string& state0);
    void append_action(const Vocabulary& v, const std::vector<int>& action_tokens);
    void append_state(const Vocabulary& v, const std::string& state_text);
    int length() const { return static_cast<int>(tokens.size()); }

    // Token cost of appending a state segment, for context budgeting.
    static int state_segment_length(const Vocabulary& v, const std::string& state_text);
};

// Renders the full chat template in one shot:
//   <user> your task is : {prompt} state : {state 0} your action : </user>
//   <asst> {action 0} <eos> ...
// Only action tokens and their terminator are loss-bearing. At most the last
// turn may be pending (state present, action absent); anything else throws.
EncodedHistory render_history(const Vocabulary& v, const std::string& task_prompt,
                              const std::vector<Turn>& turns);

// Scatters per-turn scalar rewards onto the ActionEos positions; every other
// position gets 0. Length mismatch with completed turns throws.
std::vector<double> reward_vector(const EncodedHistory& history,
                                  const std::vector<double>& turn_rewards);

} // namespace microturn::codec

#endif // MICROTURN_TEXTCODEC_HPP_
