#ifndef MICROTURN_NETS_HPP_
#define MICROTURN_NETS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rng.hpp"

namespace microturn::nets {

// Single-layer gated recurrent trunk (GRU) with a token embedding and a
// linear output head. out_dim = vocabulary size for the policy, 1 for the
// value network. Parameters live in one flat vector so the optimizer and
// checkpoints treat every net uniformly.
//
// Position semantics: the output at position i is computed from tokens
// 0..i. For the policy that is the next-token logit vector; for the value
// net it is V of the history up to and including token i.
class GruNet {
public:
    GruNet(int vocab_size, int d_embed, int d_hidden, int out_dim);

    // uniform(-0.08, 0.08) embeddings/trunk, zero output head: the initial
    // policy distribution is exactly uniform.
    void init_params(Rng& rng);

    std::vector<double>& params() { return theta_; }
    const std::vector<double>& params() const { return theta_; }
    size_t param_count() const { return theta_.size(); }
    int vocab_size() const { return vocab_; }
    int d_embed() const { return d_embed_; }
    int d_hidden() const { return d_hidden_; }
    int out_dim() const { return out_dim_; }

    // Human-readable location of a flat parameter index, for diagnostics.
    std::string param_location(size_t index) const;

    struct Cache {
        int length = 0;
        std::vector<int> tokens;
        std::vector<double> h;       // (T+1) x d_h, h[0] = 0
        std::vector<double> z, r, hc;  // T x d_h each
        std::vector<double> outputs;   // T x out_dim
    };

    // Full-sequence forward. Throws on empty input or length > max_len
    // (0 disables the check).
    Cache forward(std::span<const int> tokens, int max_len = 0) const;

    // Reverse-mode gradients from d(outputs); same layout as params().
    // Rows of d_out that are all zero are skipped.
    std::vector<double> backward(const Cache& cache,
                                 const std::vector<double>& d_out) const;

    // Incremental evaluation for sampling.
    struct Stream {
        std::vector<double> h;
        int consumed = 0;
    };
    Stream make_stream() const { return Stream{std::vector<double>(d_hidden_, 0.0), 0}; }
    // Consumes one token, fills `out` (out_dim entries).
    void stream_push(Stream& stream, int token, std::span<double> out) const;

private:
    int vocab_, d_embed_, d_hidden_, out_dim_;
    // flat layout offsets
    size_t off_embed_, off_wz_, off_uz_, off_bz_, off_wr_, off_ur_, off_br_,
        off_wh_, off_uh_, off_bh_, off_out_w_, off_out_b_;
    std::vector<double> theta_;

    void cell(const double* h_prev, int token, double* z, double* r, double* hc,
              double* h_next) const;
    void head(const double* h, double* out) const;
};

// Softmax with temperature over one logit row; numerically stabilized.
std::vector<double> softmax(std::span<const double> logits, double temperature);
// log softmax(logits/T)[index]
double log_softmax_at(std::span<const double> logits, double temperature, int index);

struct SampledToken {
    int token;
    double logp;  // under softmax(logits / temperature)
};
// Multinomial draw from softmax(logits/temperature) via inverse CDF.
SampledToken sample_token(std::span<const double> logits, double temperature, Rng& rng);
int argmax_token(std::span<const double> logits);

// Adaptive-moment estimation; deterministic given inputs.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::vector<double> m, v;

    void reset(size_t n) { m.assign(n, 0.0); v.assign(n, 0.0); step = 0; }
};
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state);

// Throws std::runtime_error naming the offending parameter if any gradient
// entry is NaN or infinite.
void check_finite(const std::vector<double>& grad, const GruNet& net, const std::string& what);

// ---------------------------------------------------------------------------
// Checkpoints: structured text header + little-endian doubles. Round-trips
// byte-identically; refuses a mismatched vocabulary hash or magic.
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::string arch = "gru";
    int d_embed = 0, d_hidden = 0, vocab_size = 0;
    uint64_t vocab_hash = 0;
    std::vector<double> policy_params, value_params;
    AdamState policy_optim, value_optim;
    std::vector<std::pair<std::string, std::string>> meta;  // free-form, sorted on save
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash);

} // namespace microturn::nets

#endif // MICROTURN_NETS_HPP_
