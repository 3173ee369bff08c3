#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "stylevar/image.hpp"
#include "stylevar/model.hpp"
#include "stylevar/rng.hpp"
#include "stylevar/tokenizer.hpp"

namespace stylevar {

struct SamplerConfig {
    int top_k = 900;  // clamped to the vocabulary size
    real top_p = real(0.96);
    real temperature = real(1);
    bool argmax = false;  // greedy decoding (temperature -> 0 limit)

    void validate() const {
        require(top_k >= 1, "sampler: top_k must be >= 1, got ", top_k);
        require(top_p > 0 && top_p <= 1, "sampler: top_p must be in (0,1], got ", top_p);
        require(temperature > 0, "sampler: temperature must be positive, got ", temperature);
    }
};

// One sampled generation. logp_sampling is the log-probability under the
// post-filter renormalized distribution actually sampled from;
// logp_full is log softmax of the untempered logits at the sampled token,
// which is what importance ratios use.
struct Trajectory {
    TokenHierarchy tokens;
    std::vector<real> logp_sampling;
    std::vector<real> logp_full;
    Image image;
    real reward = 0;
    std::uint64_t seed = 0;
};

// Keep the top_k highest-probability entries, then the smallest prefix (by
// descending probability, ties to the lower token index) whose cumulative raw
// mass reaches top_p; renormalize the survivors.
inline std::vector<real> filter_top_k_top_p(const std::vector<real>& probs, int top_k,
                                            real top_p) {
    require(!probs.empty(), "filter_top_k_top_p: empty distribution");
    real total = std::accumulate(probs.begin(), probs.end(), real(0));
    require(total > 0, "filter_top_k_top_p: all-zero distribution");
    require(std::fabs(total - real(1)) <= real(1e-9),
            "filter_top_k_top_p: probabilities sum to ", total, ", expected 1 within 1e-9");

    int v = static_cast<int>(probs.size());
    std::vector<int> order(static_cast<std::size_t>(v));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)])
            return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
        return a < b;
    });

    int keep = std::min(top_k, v);
    real cum = 0;
    int nucleus = keep;
    for (int i = 0; i < keep; ++i) {
        cum += probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        if (cum >= top_p) {
            nucleus = i + 1;
            break;
        }
    }

    std::vector<real> out(static_cast<std::size_t>(v), real(0));
    real mass = 0;
    for (int i = 0; i < nucleus; ++i) mass += probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    for (int i = 0; i < nucleus; ++i) {
        int idx = order[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(idx)] = probs[static_cast<std::size_t>(idx)] / mass;
    }
    return out;
}

namespace detail {

inline std::vector<real> softmax_row(const std::vector<real>& logits) {
    real mx = *std::max_element(logits.begin(), logits.end());
    std::vector<real> p(logits.size());
    real sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (real& x : p) x /= sum;
    return p;
}

// Inverse-CDF sample in ascending token-index order: the smallest index with
// u < cumulative probability.
inline int sample_index(const std::vector<real>& probs, real u) {
    real cum = 0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0) continue;
        cum += probs[i];
        last_positive = static_cast<int>(i);
        if (u < cum) return static_cast<int>(i);
    }
    return last_positive;  // u landed in the rounding tail
}

}  // namespace detail

// Scale-wise autoregressive generation: per-scale logits, filtered sampling,
// residual accumulation, next-scale input, final image decode. Pure function
// of (params, conditions, seed).
inline Trajectory generate(const StyleVarModel& model, const MsTokenizer& tok,
                           const TokenHierarchy& style_tokens,
                           const TokenHierarchy& content_tokens, const Image& content_image,
                           const SamplerConfig& cfg, std::uint64_t seed,
                           PolicyMode mode = PolicyMode::Current) {
    cfg.validate();
    const ScaleSchedule& sched = model.config().schedule;
    require(sched == tok.schedule(), "generate: model and tokenizer schedules differ");
    NoGradScope ng;

    Trajectory traj;
    traj.seed = seed;
    traj.tokens.maps.resize(static_cast<std::size_t>(sched.num_scales()));
    traj.logp_sampling.reserve(static_cast<std::size_t>(sched.total_tokens()));
    traj.logp_full.reserve(static_cast<std::size_t>(sched.total_tokens()));

    Rng rng(seed);
    int side = sched.final_side();
    int vocab = model.config().vocab;
    FeatureMap acc(side, side, tok.config().d);
    ScaleInputs inputs;
    inputs.feats.resize(static_cast<std::size_t>(sched.num_scales()));

    for (int k = 0; k < sched.num_scales(); ++k) {
        int s = sched.side(k);
        if (k > 0)
            inputs.feats[static_cast<std::size_t>(k)] = resample(acc.data, side, side, acc.d, s, s);
        Tensor logits =
            model.forward(content_image, inputs, style_tokens, content_tokens, k + 1, mode);
        int off = sched.token_offset(k);
        int n = sched.tokens_at(k);

        std::vector<int>& map = traj.tokens.maps[static_cast<std::size_t>(k)];
        map.resize(static_cast<std::size_t>(n));
        std::vector<real> row(static_cast<std::size_t>(vocab));
        for (int i = 0; i < n; ++i) {
            const real* lrow = logits.data().data() + static_cast<std::size_t>(off + i) * vocab;
            int token;
            if (cfg.argmax) {
                token = 0;
                for (int j = 1; j < vocab; ++j)
                    if (lrow[j] > lrow[token]) token = j;
                traj.logp_sampling.push_back(real(0));  // one-hot after greedy collapse
            } else {
                for (int j = 0; j < vocab; ++j) row[static_cast<std::size_t>(j)] = lrow[j] / cfg.temperature;
                std::vector<real> probs = detail::softmax_row(row);
                std::vector<real> filtered = filter_top_k_top_p(probs, cfg.top_k, cfg.top_p);
                token = detail::sample_index(filtered, rng.next_double());
                traj.logp_sampling.push_back(std::log(filtered[static_cast<std::size_t>(token)]));
            }
            map[static_cast<std::size_t>(i)] = token;
            // full-distribution log-prob of the untempered logits
            real lse = stylevar::detail::logsumexp_row(lrow, vocab);
            traj.logp_full.push_back(lrow[token] - lse);
        }
        tok.add_scale(acc, map, k);
    }
    traj.image = tok.decode_image(acc);
    return traj;
}

// log pi_mode(a_t | s_t) for every token of a sampled trajectory in one
// teacher-forced pass; stage-k inputs use the accumulated sampled features of
// scales < k. Differentiable when called under a recording graph.
inline Tensor teacher_forced_logprob_tensor(const StyleVarModel& model, const MsTokenizer& tok,
                                            const TokenHierarchy& tokens,
                                            const TokenHierarchy& style_tokens,
                                            const TokenHierarchy& content_tokens,
                                            const Image& content_image, PolicyMode mode) {
    int K = model.config().schedule.num_scales();
    ScaleInputs inputs = build_target_inputs(tok, tokens, K);
    Tensor logits = model.forward(content_image, inputs, style_tokens, content_tokens, K, mode);
    return gather_log_softmax(logits, tokens.flat());
}

inline std::vector<real> teacher_forced_logprobs(const StyleVarModel& model,
                                                 const MsTokenizer& tok,
                                                 const TokenHierarchy& tokens,
                                                 const TokenHierarchy& style_tokens,
                                                 const TokenHierarchy& content_tokens,
                                                 const Image& content_image, PolicyMode mode) {
    NoGradScope ng;
    return teacher_forced_logprob_tensor(model, tok, tokens, style_tokens, content_tokens,
                                         content_image, mode)
        .data();
}

// Debug dump of a trajectory as JSON.
inline void write_trajectory_json(const Trajectory& traj, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "write_trajectory_json: cannot open ", path);
    f << "{\n  \"seed\": " << traj.seed << ",\n  \"reward\": " << traj.reward
      << ",\n  \"tokens\": [";
    for (std::size_t k = 0; k < traj.tokens.maps.size(); ++k) {
        f << (k ? ", [" : "[");
        for (std::size_t i = 0; i < traj.tokens.maps[k].size(); ++i)
            f << (i ? "," : "") << traj.tokens.maps[k][i];
        f << "]";
    }
    f << "],\n  \"logp_full\": [";
    for (std::size_t i = 0; i < traj.logp_full.size(); ++i)
        f << (i ? "," : "") << traj.logp_full[i];
    f << "],\n  \"logp_sampling\": [";
    for (std::size_t i = 0; i < traj.logp_sampling.size(); ++i)
        f << (i ? "," : "") << traj.logp_sampling[i];
    f << "]\n}\n";
    require(f.good(), "write_trajectory_json: short write to ", path);
}

}  // namespace stylevar
