#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include "stylevar/data.hpp"
#include "stylevar/model.hpp"
#include "stylevar/optim.hpp"
#include "stylevar/sampler.hpp"
#include "stylevar/tokenizer.hpp"

namespace stylevar {

struct GrpoConfig {
    int group_size = 16;
    real clip_ratio = real(0.2);
    real kl_beta = real(0.1);
    real panw_alpha = real(0.7);
    real reward_lambda = real(5.0);
    real eps_std = real(1e-4);
    real ema_decay = real(0.9);
    real tau_gain = real(0.05);
    int tau_patience = 50;
    int cooldown = 300;
    real emergency_kl = real(2.0);
    int emergency_cooldown = 50;
    real lr = real(1e-5);
    real clip_norm = real(1.0);
    real adam_beta1 = real(0.9);
    real adam_beta2 = real(0.95);
    real weight_decay = real(0.01);
    int steps = 500;
    std::uint64_t seed = 0;
    bool parallel_rollouts = false;
    SamplerConfig sampler;

    void validate() const {
        require(group_size >= 2, "grpo: group size must be >= 2 (got ", group_size,
                "), std is undefined otherwise");
        require(clip_ratio > 0 && clip_ratio < 1, "grpo: clip ratio must be in (0,1), got ",
                clip_ratio);
        require(panw_alpha >= 0, "grpo: panw_alpha must be >= 0, got ", panw_alpha);
        require(eps_std >= 0 && ema_decay > 0 && ema_decay < 1, "grpo: bad eps_std/ema_decay");
        sampler.validate();
    }
};

// ---------------------------------------------------------------------------
// estimators

// Group-relative advantage: z-score against the group with population std.
inline std::vector<real> advantage(const std::vector<real>& rewards, real eps_std) {
    require(rewards.size() >= 2, "advantage: need at least 2 rewards, got ", rewards.size());
    real mean = 0;
    for (real r : rewards) mean += r;
    mean /= static_cast<real>(rewards.size());
    real var = 0;
    for (real r : rewards) {
        real d = r - mean;
        var += d * d;
    }
    var /= static_cast<real>(rewards.size());
    real denom = std::sqrt(var) + eps_std;
    std::vector<real> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i)
        out[i] = denom > 0 ? (rewards[i] - mean) / denom : real(0);
    return out;
}

// Per-token PANW weights (h_k * w_k)^(-alpha), normalized to sum to 1 over
// the trajectory. This Z is the PANW normalizer, not the codebook.
inline std::vector<real> panw_weights(const ScaleSchedule& sched, real alpha) {
    std::vector<real> out;
    out.reserve(static_cast<std::size_t>(sched.total_tokens()));
    real z = 0;
    for (int k = 0; k < sched.num_scales(); ++k) {
        real tokens = static_cast<real>(sched.tokens_at(k));
        real w = std::pow(tokens, -alpha);
        z += tokens * w;
        for (int i = 0; i < sched.tokens_at(k); ++i) out.push_back(w);
    }
    for (real& w : out) w /= z;
    return out;
}

// Schulman's non-negative k3 estimator: exp(d) - d - 1, d = logp_ref - logp_theta.
inline real k3_kl(real logp_ref, real logp_theta) {
    real d = logp_ref - logp_theta;
    return std::exp(d) - d - real(1);
}

// Clipped surrogate, pessimistic branch: -min(rho*A, clip(rho)*A).
inline real clipped_pg(real rho, real adv, real epsilon) {
    require(rho > 0, "clipped_pg: importance ratio must be positive, got ", rho);
    real clipped = std::clamp(rho, real(1) - epsilon, real(1) + epsilon);
    return -std::min(rho * adv, clipped * adv);
}

// Scalar evaluation of the full objective for a scored batch:
// (1/G) sum_i sum_t w_t (L_PG + beta * L_KL).
struct GrpoBatch {
    std::vector<Trajectory> trajectories;
    std::vector<real> rewards;
    std::vector<real> advantages;
    std::vector<std::vector<real>> logp_theta;
    std::vector<std::vector<real>> logp_old;
    std::vector<std::vector<real>> logp_ref;
    std::vector<real> panw;
};

inline real grpo_loss(const GrpoBatch& batch, const GrpoConfig& cfg) {
    std::size_t g = batch.logp_theta.size();
    require(g > 0 && batch.advantages.size() == g && batch.logp_old.size() == g &&
                batch.logp_ref.size() == g,
            "grpo_loss: incomplete batch");
    real total = 0;
    for (std::size_t i = 0; i < g; ++i) {
        require(batch.logp_theta[i].size() == batch.panw.size(),
                "grpo_loss: token count mismatch in trajectory ", i);
        real traj = 0;
        for (std::size_t t = 0; t < batch.panw.size(); ++t) {
            real rho = std::exp(batch.logp_theta[i][t] - batch.logp_old[i][t]);
            real pg = clipped_pg(rho, batch.advantages[i], cfg.clip_ratio);
            real kl = k3_kl(batch.logp_ref[i][t], batch.logp_theta[i][t]);
            traj += batch.panw[t] * (pg + cfg.kl_beta * kl);
        }
        require(std::isfinite(traj), "grpo_loss: non-finite trajectory loss at index ", i,
                " (pg+kl path)");
        total += traj;
    }
    return total / static_cast<real>(g);
}

// ---------------------------------------------------------------------------
// reference-merge state machine

enum class MergeDecision { None, Normal, Emergency };

struct MergeState {
    bool initialized = false;
    real ema = 0;
    real baseline = 0;  // reward EMA at the last merge
    long steps_since_merge = 0;
    int steps_above = 0;
    real last_raw_kl = 0;
    long merge_count = 0;
};

// One state-machine update per training step. A normal merge requires the
// EMA to exceed baseline + tau_gain for tau_patience consecutive steps and
// the cool-down to have elapsed; the emergency path fires on raw KL above
// the threshold after its own shorter cool-down.
inline MergeDecision update_merge_state(MergeState& st, real group_reward_mean, real raw_kl,
                                        const GrpoConfig& cfg) {
    if (!st.initialized) {
        st.ema = group_reward_mean;
        st.baseline = group_reward_mean;
        st.initialized = true;
    } else {
        st.ema = cfg.ema_decay * st.ema + (real(1) - cfg.ema_decay) * group_reward_mean;
    }
    ++st.steps_since_merge;
    st.last_raw_kl = raw_kl;

    auto fire = [&st](MergeDecision d) {
        st.baseline = st.ema;
        st.steps_since_merge = 0;
        st.steps_above = 0;
        ++st.merge_count;
        return d;
    };

    if (raw_kl > cfg.emergency_kl && st.steps_since_merge >= cfg.emergency_cooldown)
        return fire(MergeDecision::Emergency);

    if (st.ema > st.baseline + cfg.tau_gain)
        ++st.steps_above;
    else
        st.steps_above = 0;

    if (st.steps_above >= cfg.tau_patience && st.steps_since_merge >= cfg.cooldown)
        return fire(MergeDecision::Normal);
    return MergeDecision::None;
}

// ---------------------------------------------------------------------------
// trainer

struct GrpoStepMetrics {
    long step = 0;
    real reward_mean = 0;
    real reward_std = 0;
    real ema = 0;
    real raw_kl = 0;
    real pg_loss = 0;
    real kl_loss = 0;
    long merges = 0;
    real clip_fraction = 0;
    MergeDecision merge = MergeDecision::None;
    bool aborted = false;
};

class GrpoTrainer {
public:
    using RewardFn = std::function<real(const Trajectory&, const Triplet&)>;

    GrpoTrainer(StyleVarModel& model, const MsTokenizer& tok, std::vector<const Triplet*> train,
                RewardFn reward_fn, GrpoConfig cfg)
        : model_(model),
          tok_(tok),
          train_(std::move(train)),
          reward_fn_(std::move(reward_fn)),
          cfg_(cfg) {
        cfg_.validate();
        require(!train_.empty(), "grpo: empty training split");
        require(model_.has_adapters(), "grpo: adapters must be attached before training");
        adapter_set_ = model_.adapter_params();
        opt_ = AdamW(adapter_set_, {.lr = cfg_.lr,
                                    .beta1 = cfg_.adam_beta1,
                                    .beta2 = cfg_.adam_beta2,
                                    .eps = real(1e-8),
                                    .weight_decay = cfg_.weight_decay});
        panw_ = panw_weights(model_.config().schedule, cfg_.panw_alpha);
        sampler_cfg_ = cfg_.sampler;
        sampler_cfg_.top_k = std::min(sampler_cfg_.top_k, model_.config().vocab);
    }

    const MergeState& merge_state() const { return merge_state_; }
    AdamW& optimizer() { return opt_; }
    long step_count() const { return step_; }
    void set_step_count(long s) { step_ = s; }

    GrpoStepMetrics step() {
        GrpoStepMetrics m;
        m.step = ++step_;
        int G = cfg_.group_size;

        // pick a (content, style) pair; rollouts share its conditions,
        // without augmentation
        Rng pair_rng = Rng(cfg_.seed).derive(0x9a12).derive(static_cast<std::uint64_t>(step_));
        const Triplet& pair = *train_[static_cast<std::size_t>(pair_rng.next_below(train_.size()))];
        TokenHierarchy S = tok_.ms_quantize(tok_.encode_features(pair.style));
        TokenHierarchy C = tok_.ms_quantize(tok_.encode_features(pair.content));

        // group rollout from the snapshot policy (theta_old == theta here;
        // logp_full caches the snapshot's log-probs for the ratio)
        std::vector<Trajectory> group(static_cast<std::size_t>(G));
        auto roll = [&](int g) {
            std::uint64_t s =
                Rng(cfg_.seed).derive(0x0111).derive(static_cast<std::uint64_t>(step_)).derive(
                    static_cast<std::uint64_t>(g)).next_u64();
            group[static_cast<std::size_t>(g)] = generate(model_, tok_, S, C, pair.content,
                                                          sampler_cfg_, s, PolicyMode::Current);
        };
        if (cfg_.parallel_rollouts) {
            std::vector<std::future<void>> futs;
            for (int g = 0; g < G; ++g) futs.push_back(std::async(std::launch::async, roll, g));
            for (auto& f : futs) f.get();
        } else {
            for (int g = 0; g < G; ++g) roll(g);
        }

        std::vector<real> rewards(static_cast<std::size_t>(G));
        for (int g = 0; g < G; ++g) {
            try {
                rewards[static_cast<std::size_t>(g)] = reward_fn_(group[static_cast<std::size_t>(g)], pair);
            } catch (const std::exception& e) {
                m.aborted = true;
                abort_log_ = std::string("step ") + std::to_string(step_) + " rollout " +
                             std::to_string(g) + ": " + e.what();
                return m;
            }
            group[static_cast<std::size_t>(g)].reward = rewards[static_cast<std::size_t>(g)];
        }

        std::vector<real> adv = advantage(rewards, cfg_.eps_std);
        real mean = 0;
        for (real r : rewards) mean += r;
        mean /= G;
        real var = 0;
        for (real r : rewards) var += (r - mean) * (r - mean);
        m.reward_mean = mean;
        m.reward_std = std::sqrt(var / G);

        // reference log-probs (adapter path disabled), no grad
        std::vector<std::vector<real>> logp_ref(static_cast<std::size_t>(G));
        for (int g = 0; g < G; ++g)
            logp_ref[static_cast<std::size_t>(g)] =
                teacher_forced_logprobs(model_, tok_, group[static_cast<std::size_t>(g)].tokens, S, C,
                                        pair.content, PolicyMode::Reference);

        // PANW-weighted clipped surrogate + k3 KL, gradients through
        // log pi_theta only
        Graph graph;
        GraphScope scope(graph);
        Tensor loss;
        real pg_total = 0, kl_total = 0, raw_kl_sum = 0;
        long clipped = 0, token_count = 0;
        Tensor w_const = Tensor::from({static_cast<int>(panw_.size())}, panw_);
        Tensor ones = Tensor::from({static_cast<int>(panw_.size())},
                                   std::vector<real>(panw_.size(), real(1)));
        for (int g = 0; g < G; ++g) {
            const Trajectory& traj = group[static_cast<std::size_t>(g)];
            Tensor lp = teacher_forced_logprob_tensor(model_, tok_, traj.tokens, S, C, pair.content,
                                                      PolicyMode::Current);
            Tensor old_lp = Tensor::from({static_cast<int>(traj.logp_full.size())}, traj.logp_full);
            Tensor ref_lp = Tensor::from({static_cast<int>(logp_ref[static_cast<std::size_t>(g)].size())},
                                         logp_ref[static_cast<std::size_t>(g)]);
            Tensor ratio = stylevar::exp(sub(lp, old_lp));
            real a = adv[static_cast<std::size_t>(g)];
            Tensor pg = neg(minimum(scalar_mul(ratio, a),
                                    scalar_mul(clampt(ratio, real(1) - cfg_.clip_ratio,
                                                      real(1) + cfg_.clip_ratio),
                                               a)));
            Tensor delta = sub(ref_lp, lp);
            Tensor kl = sub(stylevar::exp(delta), add(delta, ones));
            Tensor weighted = sum_all(mul(add(pg, scalar_mul(kl, cfg_.kl_beta)), w_const));
            loss = loss.defined() ? add(loss, weighted) : weighted;

            for (std::size_t t = 0; t < panw_.size(); ++t) {
                real rho = ratio.data()[t];
                pg_total += panw_[t] * pg.data()[t];
                kl_total += panw_[t] * kl.data()[t];
                raw_kl_sum += kl.data()[t];
                if (rho < real(1) - cfg_.clip_ratio || rho > real(1) + cfg_.clip_ratio) ++clipped;
                ++token_count;
            }
        }
        loss = scalar_mul(loss, real(1) / G);
        m.pg_loss = pg_total / G;
        m.kl_loss = kl_total / G;
        m.raw_kl = raw_kl_sum / static_cast<real>(token_count);
        m.clip_fraction = static_cast<real>(clipped) / static_cast<real>(token_count);
        require(std::isfinite(loss.item()), "grpo step ", step_, ": non-finite loss (pg=", m.pg_loss,
                " kl=", m.kl_loss, ")");

        adapter_set_.zero_grad();
        backward(graph, loss);
        clip_global_norm(adapter_set_, cfg_.clip_norm);
        opt_.step(adapter_set_);

        // iterative reference update
        MergeDecision d = update_merge_state(merge_state_, m.reward_mean, m.raw_kl, cfg_);
        if (d != MergeDecision::None) {
            model_.lora_merge();
            opt_.attach(adapter_set_);  // fresh adapter, fresh moments
        }
        m.merge = d;
        m.merges = merge_state_.merge_count;
        m.ema = merge_state_.ema;
        return m;
    }

    const std::string& abort_log() const { return abort_log_; }

    // Current-policy probability of `token` at the single scale-1 position
    // for a given pair; diagnostic for the degenerate-reward task.
    real scale1_token_probability(const Triplet& pair, int token) {
        NoGradScope ng;
        TokenHierarchy S = tok_.ms_quantize(tok_.encode_features(pair.style));
        TokenHierarchy C = tok_.ms_quantize(tok_.encode_features(pair.content));
        ScaleInputs inputs;
        inputs.feats.resize(1);
        Tensor logits = model_.forward(pair.content, inputs, S, C, 1, PolicyMode::Current);
        std::vector<real> p = detail::softmax_row(logits.data());
        return p[static_cast<std::size_t>(token)];
    }

private:
    StyleVarModel& model_;
    const MsTokenizer& tok_;
    std::vector<const Triplet*> train_;
    RewardFn reward_fn_;
    GrpoConfig cfg_;
    SamplerConfig sampler_cfg_;
    std::vector<real> panw_;
    ParamSet adapter_set_;
    AdamW opt_;
    MergeState merge_state_;
    long step_ = 0;
    std::string abort_log_;
};

inline void write_grpo_csv_header(std::ofstream& f) {
    f << "step,reward_mean,reward_std,ema,kl_raw,pg_loss,kl_loss,merges,clip_fraction\n";
}

inline void write_grpo_csv_row(std::ofstream& f, const GrpoStepMetrics& m) {
    char line[512];
    std::snprintf(line, sizeof(line), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%.17g\n", m.step,
                  m.reward_mean, m.reward_std, m.ema, m.raw_kl, m.pg_loss, m.kl_loss, m.merges,
                  m.clip_fraction);
    f << line;
}

inline void append_merge_audit(const std::string& path, const GrpoStepMetrics& m,
                               const MergeState& st) {
    std::ofstream f(path, std::ios::app);
    require(f.good(), "merge audit: cannot open ", path);
    char line[256];
    std::snprintf(line, sizeof(line),
                  "{\"step\":%ld,\"type\":\"%s\",\"ema\":%.17g,\"raw_kl\":%.17g,\"merges\":%ld}\n",
                  m.step, m.merge == MergeDecision::Emergency ? "emergency" : "normal", st.ema,
                  st.last_raw_kl, st.merge_count);
    f << line;
}

}  // namespace stylevar
