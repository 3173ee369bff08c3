#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stylevar/data.hpp"
#include "stylevar/model.hpp"
#include "stylevar/optim.hpp"
#include "stylevar/tokenizer.hpp"

namespace stylevar {

// Piecewise-constant learning-rate schedule: `lr` applies to epochs below
// `until_epoch`; epochs beyond the last segment keep the last value.
struct LrSegment {
    int until_epoch;
    real lr;
};

inline real lr_at_epoch(const std::vector<LrSegment>& schedule, int epoch) {
    require(!schedule.empty(), "lr schedule: empty");
    require(epoch >= 0, "lr schedule: negative epoch ", epoch);
    for (const LrSegment& s : schedule)
        if (epoch < s.until_epoch) return s.lr;
    return schedule.back().lr;
}

struct SftConfig {
    int epochs = 10;
    std::vector<LrSegment> lr_schedule{{6, real(5e-4)}, {10, real(1e-4)}};
    int batch_size = 8;
    int grad_accum = 1;
    bool augment = true;
    real clip_norm = real(1.0);
    real adam_beta1 = real(0.9);
    real adam_beta2 = real(0.95);
    real weight_decay = real(0.01);
    std::uint64_t seed = 0;
    int val_every = 50;  // optimizer steps between validation passes
    bool deterministic = true;

    void validate() const {
        require(epochs >= 1 && batch_size >= 1 && grad_accum >= 1, "sft: bad epochs/batch sizes");
        require(!lr_schedule.empty(), "sft: lr schedule must cover all epochs");
        for (std::size_t i = 1; i < lr_schedule.size(); ++i)
            require(lr_schedule[i].until_epoch > lr_schedule[i - 1].until_epoch,
                    "sft: lr schedule breakpoints must be increasing");
    }
};

struct SftStepResult {
    real loss = 0;
    real accuracy = 0;
};

// Stage-1 supervised fine-tuning: teacher-forced parallel prediction with
// uniform cross-entropy over all token positions.
class SftTrainer {
public:
    SftTrainer(StyleVarModel& model, const MsTokenizer& tok, SftConfig cfg)
        : model_(model), tok_(tok), cfg_(cfg) {
        cfg_.validate();
        params_ = model_.base_params();
        opt_ = AdamW(params_, {.lr = lr_at_epoch(cfg_.lr_schedule, 0),
                               .beta1 = cfg_.adam_beta1,
                               .beta2 = cfg_.adam_beta2,
                               .eps = real(1e-8),
                               .weight_decay = cfg_.weight_decay});
    }

    AdamW& optimizer() { return opt_; }
    long step_count() const { return step_; }
    void set_step_count(long s) { step_ = s; }

    // Forward/backward over one micro-batch; every sample's gradient is
    // scaled by `scale` so N accumulated micro-batches of size m reproduce a
    // single N*m batch bit-exactly (same per-sample scale, same order).
    SftStepResult accumulate_gradients(const std::vector<const Triplet*>& batch, real scale,
                                       bool augment, std::uint64_t aug_stream) {
        SftStepResult res;
        long correct = 0, total = 0;
        for (std::size_t bi = 0; bi < batch.size(); ++bi) {
            const Triplet& t = *batch[bi];
            Image content = t.content;
            Image style = t.style;
            if (augment) {
                Rng rng = Rng(cfg_.seed).derive(0xa06).derive(aug_stream).derive(
                    static_cast<std::uint64_t>(t.id));
                apply_augmentation(content, style, rng);
            }
            Sample s = tokenize(content, style, t.target, augment ? nullptr : &t);

            Graph g;
            GraphScope scope(g);
            Tensor logits =
                model_.forward_teacher_forced(content, s.inputs, s.style_tokens, s.content_tokens,
                                              PolicyMode::Current);
            Tensor loss = cross_entropy(logits, s.targets);
            real lv = loss.item();
            require(std::isfinite(lv), "sft step ", step_ + 1, ": non-finite loss on triplet ", t.id);
            backward(g, loss, scale);
            res.loss += lv;

            int vocab = model_.config().vocab;
            for (std::size_t i = 0; i < s.targets.size(); ++i) {
                const real* row = logits.data().data() + i * static_cast<std::size_t>(vocab);
                int best = 0;
                for (int j = 1; j < vocab; ++j)
                    if (row[j] > row[best]) best = j;
                if (best == s.targets[i]) ++correct;
                ++total;
            }
        }
        res.loss /= static_cast<real>(batch.size());
        res.accuracy = static_cast<real>(correct) / static_cast<real>(total);
        return res;
    }

    void apply_update(real lr) {
        ++step_;
        clip_global_norm(params_, cfg_.clip_norm);
        opt_.step(params_, lr);
        params_.zero_grad();
    }

    // One optimizer step on one batch (no accumulation).
    SftStepResult sft_step(const std::vector<const Triplet*>& batch, real lr) {
        require(!batch.empty(), "sft_step: empty batch");
        SftStepResult res = accumulate_gradients(batch, real(1) / static_cast<real>(batch.size()),
                                                 cfg_.augment, static_cast<std::uint64_t>(step_));
        apply_update(lr);
        return res;
    }

    // Teacher-forced loss/accuracy for explicit targets, no gradients.
    SftStepResult eval_with_targets(const Image& content, const TokenHierarchy& style_tokens,
                                    const TokenHierarchy& content_tokens, const ScaleInputs& inputs,
                                    const std::vector<int>& targets) {
        NoGradScope ng;
        Tensor logits = model_.forward_teacher_forced(content, inputs, style_tokens, content_tokens,
                                                      PolicyMode::Current);
        SftStepResult res;
        res.loss = cross_entropy(logits, targets).item();
        long correct = 0;
        int vocab = model_.config().vocab;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const real* row = logits.data().data() + i * static_cast<std::size_t>(vocab);
            int best = 0;
            for (int j = 1; j < vocab; ++j)
            if (row[j] > row[best]) best = j;
            if (best == targets[i]) ++correct;
        }
        res.accuracy = static_cast<real>(correct) / static_cast<real>(targets.size());
        return res;
    }

    // Teacher-forced loss/accuracy without gradients.
    SftStepResult evaluate(const std::vector<const Triplet*>& split) {
        SftStepResult res;
        real acc = 0;
        for (const Triplet* tp : split) {
            Sample s = tokenize(tp->content, tp->style, tp->target, tp);
            SftStepResult one =
                eval_with_targets(tp->content, s.style_tokens, s.content_tokens, s.inputs, s.targets);
            res.loss += one.loss;
            acc += one.accuracy;
        }
        res.loss /= static_cast<real>(split.size());
        res.accuracy = acc / static_cast<real>(split.size());
        return res;
    }

    // Full run: per-step CSV metrics, best-val and final checkpoints via the
    // save callback (tag "best" / "final").
    void run(const std::vector<Triplet>& dataset, const std::string& csv_path,
             const std::function<void(const std::string&)>& save_cb) {
        std::vector<const Triplet*> train = split_of(dataset, "train");
        std::vector<const Triplet*> val = split_of(dataset, "val");
        require(!train.empty(), "sft run: empty train split");

        std::ofstream csv(csv_path);
        require(csv.good(), "sft run: cannot open metrics file ", csv_path);
        csv << "step,epoch,lr,loss,acc,val_loss,val_acc\n";

        real best_val = std::numeric_limits<real>::max();
        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            real lr = lr_at_epoch(cfg_.lr_schedule, epoch);
            std::vector<const Triplet*> order = train;
            // deterministic mode: the same assembly order every epoch
            Rng shuffle_rng = cfg_.deterministic
                                  ? Rng(cfg_.seed).derive(0xba7c)
                                  : Rng(cfg_.seed).derive(0xba7c).derive(
                                        static_cast<std::uint64_t>(epoch));
            shuffle_rng.shuffle(order.begin(), order.end());

            std::size_t pos = 0;
            while (pos < order.size()) {
                SftStepResult agg;
                int micro = 0;
                std::size_t planned = std::min(order.size() - pos,
                                               static_cast<std::size_t>(cfg_.batch_size) *
                                                   static_cast<std::size_t>(cfg_.grad_accum));
                real scale = real(1) / static_cast<real>(planned);
                while (micro < cfg_.grad_accum && pos < order.size()) {
                    std::size_t take = std::min(static_cast<std::size_t>(cfg_.batch_size),
                                                order.size() - pos);
                    std::vector<const Triplet*> batch(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                                      order.begin() + static_cast<std::ptrdiff_t>(pos + take));
                    SftStepResult r = accumulate_gradients(batch, scale, cfg_.augment,
                                                           static_cast<std::uint64_t>(step_));
                    agg.loss += r.loss * static_cast<real>(take);
                    agg.accuracy += r.accuracy * static_cast<real>(take);
                    pos += take;
                    ++micro;
                }
                agg.loss /= static_cast<real>(planned);
                agg.accuracy /= static_cast<real>(planned);
                apply_update(lr);

                bool do_val = !val.empty() && (step_ % cfg_.val_every == 0);
                SftStepResult v;
                if (do_val) {
                    v = evaluate(val);
                    if (v.loss < best_val) {
                        best_val = v.loss;
                        if (save_cb) save_cb("best");
                    }
                }
                char line[512];
                if (do_val)
                    std::snprintf(line, sizeof(line), "%ld,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                                  step_, epoch, lr, agg.loss, agg.accuracy, v.loss, v.accuracy);
                else
                    std::snprintf(line, sizeof(line), "%ld,%d,%.17g,%.17g,%.17g,,\n", step_, epoch,
                                  lr, agg.loss, agg.accuracy);
                csv << line;
            }
        }
        if (save_cb) save_cb("final");
        require(csv.good(), "sft run: short write to ", csv_path);
    }

    // Deterministic batch fingerprint; used by the augmentation-off identity
    // checks.
    std::uint64_t batch_hash(const std::vector<const Triplet*>& batch, bool augment,
                             std::uint64_t aug_stream) const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const Triplet* tp : batch) {
            Image content = tp->content;
            Image style = tp->style;
            if (augment) {
                Rng rng = Rng(cfg_.seed).derive(0xa06).derive(aug_stream).derive(
                    static_cast<std::uint64_t>(tp->id));
                apply_augmentation(content, style, rng);
            }
            h = fnv1a(content.data, h);
            h = fnv1a(style.data, h);
            h = fnv1a(tp->target.data, h);
        }
        return h;
    }

    // rotation in {0, +10, -10} degrees and brightness x[0.8, 1.2] on the
    // content; random crop to 87.5% area then resize on the style
    void apply_augmentation(Image& content, Image& style, Rng& rng) const {
        int rot = static_cast<int>(rng.next_below(3));
        if (rot == 1) content = rotate_deg(content, real(10));
        if (rot == 2) content = rotate_deg(content, real(-10));
        content = adjust_brightness(content, rng.uniform(real(0.8), real(1.2)));
        int side = style.h;
        int crop_side = std::max(1, static_cast<int>(std::lround(side * std::sqrt(0.875))));
        int y0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(side - crop_side + 1)));
        int x0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(side - crop_side + 1)));
        style = resize(crop(style, y0, x0, crop_side, crop_side), side, side);
    }

private:
    struct Sample {
        TokenHierarchy style_tokens, content_tokens;
        ScaleInputs inputs;
        std::vector<int> targets;
    };

    Sample tokenize(const Image& content, const Image& style, const Image& target,
                    const Triplet* cache_key) {
        if (cache_key) {
            auto it = cache_.find(cache_key);
            if (it != cache_.end()) return it->second;
        }
        Sample s;
        TokenHierarchy R = tok_.ms_quantize(tok_.encode_features(target));
        s.style_tokens = tok_.ms_quantize(tok_.encode_features(style));
        s.content_tokens = tok_.ms_quantize(tok_.encode_features(content));
        s.inputs = build_target_inputs(tok_, R, tok_.schedule().num_scales());
        s.targets = R.flat();
        if (cache_key) cache_[cache_key] = s;
        return s;
    }

    StyleVarModel& model_;
    const MsTokenizer& tok_;
    SftConfig cfg_;
    ParamSet params_;
    AdamW opt_;
    long step_ = 0;
    std::map<const Triplet*, Sample> cache_;
};

}  // namespace stylevar
