#pragma once

#include <string>
#include <vector>

#include "stylevar/checkpoint.hpp"
#include "stylevar/config.hpp"
#include "stylevar/metrics.hpp"
#include "stylevar/model.hpp"
#include "stylevar/optim.hpp"
#include "stylevar/tokenizer.hpp"

namespace stylevar {

// Everything a pipeline stage needs, built from one RunConfig.
struct Session {
    RunConfig cfg;
    MsTokenizer tokenizer;
    StyleVarModel model;
    ProxyFeatureNet proxy;

    static Session build(const RunConfig& cfg) {
        return Session{cfg, MsTokenizer::build(cfg.tokenizer), StyleVarModel::init(cfg.model),
                       ProxyFeatureNet(cfg.reward_proxy_seed)};
    }
};

// Full training state: config snapshot, frozen tokenizer, model weights,
// adapters under their own namespace, optimizer moments, and counters.
inline Checkpoint make_checkpoint(const RunConfig& cfg, StyleVarModel& model,
                                  const MsTokenizer& tok, AdamW* opt, ParamSet* opt_params,
                                  long trainer_step) {
    Checkpoint ck;
    ck.config_json = cfg.to_json().dump();

    ck.add_real("tokenizer/encoder", {static_cast<int>(tok.encoder_weights().size())},
                tok.encoder_weights());
    ck.add_real("tokenizer/decoder", {static_cast<int>(tok.decoder_weights().size())},
                tok.decoder_weights());
    ck.add_real("tokenizer/codebook", {tok.codebook().size(), tok.codebook().dim()},
                tok.codebook().raw());

    ParamSet base = model.base_params();
    for (std::size_t i = 0; i < base.size(); ++i)
        ck.add_real(base.name(i), base.tensor(i).shape(), base.tensor(i).data());
    if (model.has_adapters()) {
        ParamSet ad = model.adapter_params();
        for (std::size_t i = 0; i < ad.size(); ++i)
            ck.add_real(ad.name(i), ad.tensor(i).shape(), ad.tensor(i).data());
    }

    if (opt && opt_params) {
        for (std::size_t i = 0; i < opt_params->size(); ++i) {
            ck.add_real("opt/m/" + opt_params->name(i), {static_cast<int>(opt->first_moments()[i].size())},
                        opt->first_moments()[i]);
            ck.add_real("opt/v/" + opt_params->name(i), {static_cast<int>(opt->second_moments()[i].size())},
                        opt->second_moments()[i]);
        }
        ck.add_i64("opt/step", {opt->step_count()});
    }
    ck.add_i64("trainer/step", {trainer_step});
    ck.add_i64("model/merge_count", {model.merge_count()});
    ck.add_u64("rng/base_seed", {cfg.seed});
    return ck;
}

inline MsTokenizer restore_tokenizer(const Checkpoint& ck, const TokenizerConfig& cfg) {
    Codebook cb(cfg.d, ck.get_real("tokenizer/codebook"));
    return MsTokenizer::restore(cfg, ck.get_real("tokenizer/encoder"),
                                ck.get_real("tokenizer/decoder"), std::move(cb));
}

// Loads weights by name. include_adapters=false (reference-mode loading)
// skips the adapter namespace entirely.
inline void restore_model(const Checkpoint& ck, StyleVarModel& model, bool include_adapters) {
    ParamSet base = model.base_params();
    for (std::size_t i = 0; i < base.size(); ++i) {
        std::vector<real> v = ck.get_real(base.name(i));
        require(v.size() == base.tensor(i).data().size(), "restore: size mismatch for ",
                base.name(i));
        base.tensor(i).mutable_data() = std::move(v);
    }
    if (include_adapters && ck.has("adapter/block0/self_q/down")) {
        if (!model.has_adapters()) model.attach_adapters(model.config().adapter_rank);
        ParamSet ad = model.adapter_params();
        for (std::size_t i = 0; i < ad.size(); ++i) {
            std::vector<real> v = ck.get_real(ad.name(i));
            require(v.size() == ad.tensor(i).data().size(), "restore: size mismatch for ",
                    ad.name(i));
            ad.tensor(i).mutable_data() = std::move(v);
        }
    }
}

inline void restore_optimizer(const Checkpoint& ck, AdamW& opt, const ParamSet& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        opt.first_moments()[i] = ck.get_real("opt/m/" + params.name(i));
        opt.second_moments()[i] = ck.get_real("opt/v/" + params.name(i));
    }
    opt.set_step_count(ck.get_i64("opt/step")[0]);
}

inline long restored_trainer_step(const Checkpoint& ck) { return ck.get_i64("trainer/step")[0]; }

}  // namespace stylevar
