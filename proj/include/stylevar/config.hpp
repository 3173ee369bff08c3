#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylevar/grpo.hpp"
#include "stylevar/metrics.hpp"
#include "stylevar/model.hpp"
#include "stylevar/sampler.hpp"
#include "stylevar/sft.hpp"
#include "stylevar/tokenizer.hpp"

namespace stylevar {

namespace detail {

// Tracks which keys were consumed; unknown keys are hard errors so drifting
// hyperparameter names cannot pass silently.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j_.is_object(), "config: ", path_, " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (j_.contains(key)) {
            try {
                out = j_.at(key).get<T>();
            } catch (const nlohmann::json::exception& e) {
                fail("config: bad value for ", path_, ".", key, ": ", e.what());
            }
        }
        seen_.insert(key);
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const nlohmann::json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            require(seen_.count(it.key()) > 0, "config: unknown key ", path_, ".", it.key());
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace detail

struct DataGenConfig {
    int n = 64;
    std::uint64_t seed = 1;
    int image_size = 32;
};

// Whole-run configuration; sections mirror the pipeline stages. Unknown keys
// anywhere are rejected.
struct RunConfig {
    bool deterministic = true;
    std::uint64_t seed = 0;
    ScaleSchedule schedule = ScaleSchedule::full();
    TokenizerConfig tokenizer;
    ModelConfig model;
    SamplerConfig sampler;
    SftConfig sft;
    GrpoConfig grpo;
    std::uint64_t reward_proxy_seed = 7;
    DataGenConfig data;

    // Propagates shared dimensions across sections and validates the result.
    void finalize() {
        tokenizer.schedule = schedule;
        model.schedule = schedule;
        model.vocab = tokenizer.V;
        model.feature_dim = tokenizer.d;
        tokenizer.image_size = data.image_size;
        model.image_size = data.image_size;
        grpo.sampler = sampler;
        model.validate();
        sft.validate();
        sampler.validate();
        require(data.image_size % schedule.final_side() == 0, "config: image size ",
                data.image_size, " not divisible by final scale side ", schedule.final_side());
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        detail::StrictObject root(j, "");
        root.get("deterministic", c.deterministic);
        root.get("seed", c.seed);

        if (root.has("schedule")) {
            detail::StrictObject s(root.raw("schedule"), "schedule");
            std::string preset;
            s.get("preset", preset);
            std::vector<int> sides;
            s.get("sides", sides);
            s.finish();
            require(preset.empty() != sides.empty(),
                    "config: schedule needs exactly one of preset/sides");
            if (!sides.empty())
                c.schedule = ScaleSchedule(sides);
            else if (preset == "full")
                c.schedule = ScaleSchedule::full();
            else if (preset == "toy")
                c.schedule = ScaleSchedule::toy();
            else
                fail("config: unknown schedule preset '", preset, "'");
        }
        if (root.has("tokenizer")) {
            detail::StrictObject s(root.raw("tokenizer"), "tokenizer");
            s.get("d", c.tokenizer.d);
            s.get("vocab", c.tokenizer.V);
            s.get("seed", c.tokenizer.seed);
            s.get("kmeans_iters", c.tokenizer.kmeans_iters);
            s.get("codebook_images", c.tokenizer.codebook_images);
            s.finish();
        }
        if (root.has("model")) {
            detail::StrictObject s(root.raw("model"), "model");
            s.get("embed_dim", c.model.embed_dim);
            s.get("heads", c.model.heads);
            s.get("layers", c.model.layers);
            s.get("blend_alpha", c.model.blend_alpha);
            s.get("adapter_rank", c.model.adapter_rank);
            s.get("adapter_scaling", c.model.adapter_scaling);
            s.get("start_c1", c.model.start_c1);
            s.get("start_c2", c.model.start_c2);
            s.get("init_std", c.model.init_std);
            s.get("seed", c.model.seed);
            s.finish();
        }
        if (root.has("sampler")) {
            detail::StrictObject s(root.raw("sampler"), "sampler");
            s.get("top_k", c.sampler.top_k);
            s.get("top_p", c.sampler.top_p);
            s.get("temperature", c.sampler.temperature);
            s.get("argmax", c.sampler.argmax);
            s.finish();
        }
        if (root.has("sft")) {
            detail::StrictObject s(root.raw("sft"), "sft");
            s.get("epochs", c.sft.epochs);
            if (s.has("lr_schedule")) {
                c.sft.lr_schedule.clear();
                for (const auto& seg : s.raw("lr_schedule")) {
                    detail::StrictObject o(seg, "sft.lr_schedule[]");
                    LrSegment ls{0, real(0)};
                    o.get("until_epoch", ls.until_epoch);
                    o.get("lr", ls.lr);
                    o.finish();
                    c.sft.lr_schedule.push_back(ls);
                }
            }
            s.get("batch_size", c.sft.batch_size);
            s.get("grad_accum", c.sft.grad_accum);
            s.get("augment", c.sft.augment);
            s.get("clip_norm", c.sft.clip_norm);
            s.get("adam_beta1", c.sft.adam_beta1);
            s.get("adam_beta2", c.sft.adam_beta2);
            s.get("weight_decay", c.sft.weight_decay);
            s.get("seed", c.sft.seed);
            s.get("val_every", c.sft.val_every);
            s.finish();
        }
        if (root.has("grpo")) {
            detail::StrictObject s(root.raw("grpo"), "grpo");
            s.get("group_size", c.grpo.group_size);
            s.get("clip_ratio", c.grpo.clip_ratio);
            s.get("kl_beta", c.grpo.kl_beta);
            s.get("panw_alpha", c.grpo.panw_alpha);
            s.get("reward_lambda", c.grpo.reward_lambda);
            s.get("eps_std", c.grpo.eps_std);
            s.get("ema_decay", c.grpo.ema_decay);
            s.get("tau_gain", c.grpo.tau_gain);
            s.get("tau_patience", c.grpo.tau_patience);
            s.get("cooldown", c.grpo.cooldown);
            s.get("emergency_kl", c.grpo.emergency_kl);
            s.get("emergency_cooldown", c.grpo.emergency_cooldown);
            s.get("lr", c.grpo.lr);
            s.get("clip_norm", c.grpo.clip_norm);
            s.get("adam_beta1", c.grpo.adam_beta1);
            s.get("adam_beta2", c.grpo.adam_beta2);
            s.get("weight_decay", c.grpo.weight_decay);
            s.get("steps", c.grpo.steps);
            s.get("seed", c.grpo.seed);
            s.get("parallel_rollouts", c.grpo.parallel_rollouts);
            s.finish();
        }
        if (root.has("reward")) {
            detail::StrictObject s(root.raw("reward"), "reward");
            s.get("proxy_seed", c.reward_proxy_seed);
            s.finish();
        }
        if (root.has("data")) {
            detail::StrictObject s(root.raw("data"), "data");
            s.get("n", c.data.n);
            s.get("seed", c.data.seed);
            s.get("image_size", c.data.image_size);
            s.finish();
        }
        root.finish();
        c.finalize();
        return c;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream f(path);
        require(f.good(), "config: cannot open ", path);
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            fail("config: parse error in ", path, ": ", e.what());
        }
        return from_json(j);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["deterministic"] = deterministic;
        j["seed"] = seed;
        j["schedule"] = {{"sides", schedule.sides()}};
        j["tokenizer"] = {{"d", tokenizer.d},
                          {"vocab", tokenizer.V},
                          {"seed", tokenizer.seed},
                          {"kmeans_iters", tokenizer.kmeans_iters},
                          {"codebook_images", tokenizer.codebook_images}};
        j["model"] = {{"embed_dim", model.embed_dim},
                      {"heads", model.heads},
                      {"layers", model.layers},
                      {"blend_alpha", model.blend_alpha},
                      {"adapter_rank", model.adapter_rank},
                      {"adapter_scaling", model.adapter_scaling},
                      {"start_c1", model.start_c1},
                      {"start_c2", model.start_c2},
                      {"init_std", model.init_std},
                      {"seed", model.seed}};
        j["sampler"] = {{"top_k", sampler.top_k},
                        {"top_p", sampler.top_p},
                        {"temperature", sampler.temperature},
                        {"argmax", sampler.argmax}};
        nlohmann::json lrs = nlohmann::json::array();
        for (const LrSegment& s : sft.lr_schedule)
            lrs.push_back({{"until_epoch", s.until_epoch}, {"lr", s.lr}});
        j["sft"] = {{"epochs", sft.epochs},
                    {"lr_schedule", lrs},
                    {"batch_size", sft.batch_size},
                    {"grad_accum", sft.grad_accum},
                    {"augment", sft.augment},
                    {"clip_norm", sft.clip_norm},
                    {"adam_beta1", sft.adam_beta1},
                    {"adam_beta2", sft.adam_beta2},
                    {"weight_decay", sft.weight_decay},
                    {"seed", sft.seed},
                    {"val_every", sft.val_every}};
        j["grpo"] = {{"group_size", grpo.group_size},
                     {"clip_ratio", grpo.clip_ratio},
                     {"kl_beta", grpo.kl_beta},
                     {"panw_alpha", grpo.panw_alpha},
                     {"reward_lambda", grpo.reward_lambda},
                     {"eps_std", grpo.eps_std},
                     {"ema_decay", grpo.ema_decay},
                     {"tau_gain", grpo.tau_gain},
                     {"tau_patience", grpo.tau_patience},
                     {"cooldown", grpo.cooldown},
                     {"emergency_kl", grpo.emergency_kl},
                     {"emergency_cooldown", grpo.emergency_cooldown},
                     {"lr", grpo.lr},
                     {"clip_norm", grpo.clip_norm},
                     {"adam_beta1", grpo.adam_beta1},
                     {"adam_beta2", grpo.adam_beta2},
                     {"weight_decay", grpo.weight_decay},
                     {"steps", grpo.steps},
                     {"seed", grpo.seed},
                     {"parallel_rollouts", grpo.parallel_rollouts}};
        j["reward"] = {{"proxy_seed", reward_proxy_seed}};
        j["data"] = {{"n", data.n}, {"seed", data.seed}, {"image_size", data.image_size}};
        return j;
    }
};

}  // namespace stylevar
