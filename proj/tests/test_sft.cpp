#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stylevar/sft.hpp"

using namespace stylevar;

namespace {

TokenizerConfig tok_cfg() {
    TokenizerConfig cfg;
    cfg.d = 8;
    cfg.V = 64;
    cfg.image_size = 16;
    cfg.schedule = ScaleSchedule::toy();
    cfg.seed = 42;
    cfg.codebook_images = 24;
    return cfg;
}

ModelConfig model_cfg() {
    ModelConfig cfg;
    cfg.embed_dim = 32;
    cfg.heads = 4;
    cfg.layers = 2;
    cfg.vocab = 64;
    cfg.feature_dim = 8;
    cfg.image_size = 16;
    cfg.schedule = ScaleSchedule::toy();
    cfg.seed = 77;
    return cfg;
}

std::vector<Triplet> small_dataset(int n, std::uint64_t seed) {
    std::vector<Triplet> out;
    for (int i = 0; i < n; ++i) {
        Triplet t = make_triplet(seed, i, 16);
        t.split = i < n - 1 ? "train" : "val";
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TEST_CASE("lr schedule") {
    std::vector<LrSegment> sched{{6, 5e-4}, {10, 1e-4}};
    SECTION("first six epochs at 5e-4") {
        CHECK(lr_at_epoch(sched, 0) == 5e-4);
        CHECK(lr_at_epoch(sched, 5) == 5e-4);
    }
    SECTION("final epochs at 1e-4") {
        CHECK(lr_at_epoch(sched, 6) == 1e-4);
        CHECK(lr_at_epoch(sched, 7) == 1e-4);
        CHECK(lr_at_epoch(sched, 9) == 1e-4);
    }
    SECTION("beyond the schedule keeps the last value") {
        CHECK(lr_at_epoch(sched, 25) == 1e-4);
    }
    SECTION("single segment is constant") {
        std::vector<LrSegment> one{{3, 2e-3}};
        for (int e = 0; e < 10; ++e) CHECK(lr_at_epoch(one, e) == 2e-3);
    }
}

TEST_CASE("untrained model starts near ln V") {
    auto tok = MsTokenizer::build(tok_cfg());
    auto model = StyleVarModel::init(model_cfg());
    SftConfig cfg;
    cfg.augment = false;
    cfg.seed = 3;
    SftTrainer trainer(model, tok, cfg);
    auto data = small_dataset(4, 11);
    auto split = split_of(data, "train");
    SftStepResult r = trainer.evaluate(split);
    CHECK(r.loss == Catch::Approx(std::log(64.0)).margin(0.3));
}

TEST_CASE("accuracy is 1.0 when targets equal the model argmax") {
    auto tok = MsTokenizer::build(tok_cfg());
    auto model = StyleVarModel::init(model_cfg());
    SftConfig cfg;
    cfg.augment = false;
    SftTrainer trainer(model, tok, cfg);

    Triplet t = make_triplet(21, 0, 16);
    TokenHierarchy R = tok.ms_quantize(tok.encode_features(t.target));
    TokenHierarchy S = tok.ms_quantize(tok.encode_features(t.style));
    TokenHierarchy C = tok.ms_quantize(tok.encode_features(t.content));
    ScaleInputs inputs = build_target_inputs(tok, R, 4);

    // read the argmax once, then feed it back as the target
    NoGradScope ng;
    Tensor logits = model.forward_teacher_forced(t.content, inputs, S, C, PolicyMode::Current);
    std::vector<int> argmax(static_cast<std::size_t>(logits.dim(0)));
    for (int i = 0; i < logits.dim(0); ++i) {
        const real* row = logits.data().data() + static_cast<std::size_t>(i) * 64;
        int best = 0;
        for (int j = 1; j < 64; ++j)
            if (row[j] > row[best]) best = j;
        argmax[static_cast<std::size_t>(i)] = best;
    }
    SftStepResult r = trainer.eval_with_targets(t.content, S, C, inputs, argmax);
    CHECK(r.accuracy == 1.0);
}

TEST_CASE("gradient accumulation equals one large batch bit-exactly") {
    auto tok = MsTokenizer::build(tok_cfg());
    auto data = small_dataset(4, 9);
    std::vector<const Triplet*> batch{&data[0], &data[1], &data[2], &data[3]};
    std::vector<const Triplet*> first{&data[0], &data[1]};
    std::vector<const Triplet*> second{&data[2], &data[3]};

    SftConfig cfg;
    cfg.augment = false;

    auto model_a = StyleVarModel::init(model_cfg());
    SftTrainer ta(model_a, tok, cfg);
    ta.sft_step(batch, 5e-4);

    auto model_b = StyleVarModel::init(model_cfg());
    SftTrainer tb(model_b, tok, cfg);
    tb.accumulate_gradients(first, 0.25, false, 0);
    tb.accumulate_gradients(second, 0.25, false, 0);
    tb.apply_update(5e-4);

    ParamSet pa = model_a.base_params();
    ParamSet pb = model_b.base_params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        INFO(pa.name(i));
        CHECK(pa.tensor(i).data() == pb.tensor(i).data());
    }
}

TEST_CASE("loss EMA decreases over the early steps of a toy run") {
    auto tok = MsTokenizer::build(tok_cfg());
    auto model = StyleVarModel::init(model_cfg());
    SftConfig cfg;
    cfg.augment = false;
    cfg.lr_schedule = {{100, 1e-3}};
    SftTrainer trainer(model, tok, cfg);
    auto data = small_dataset(3, 13);
    std::vector<const Triplet*> batch{&data[0], &data[1]};

    real ema = 0, ema_early = 0;
    for (int i = 1; i <= 150; ++i) {
        real loss = trainer.sft_step(batch, 1e-3).loss;
        ema = i == 1 ? loss : 0.9 * ema + 0.1 * loss;
        if (i == 15) ema_early = ema;
    }
    CHECK(ema < ema_early);
}

TEST_CASE("batch hashes") {
    auto tok = MsTokenizer::build(tok_cfg());
    auto model = StyleVarModel::init(model_cfg());
    SftConfig cfg;
    SftTrainer trainer(model, tok, cfg);
    auto data = small_dataset(3, 17);
    std::vector<const Triplet*> batch{&data[0], &data[1], &data[2]};

    SECTION("augmentation disabled: identical across epochs/streams") {
        CHECK(trainer.batch_hash(batch, false, 0) == trainer.batch_hash(batch, false, 1));
    }
    SECTION("augmentation enabled: stream-dependent but reproducible") {
        CHECK(trainer.batch_hash(batch, true, 0) == trainer.batch_hash(batch, true, 0));
        CHECK(trainer.batch_hash(batch, true, 0) != trainer.batch_hash(batch, true, 1));
    }
}

TEST_CASE("non-finite loss aborts the step with a diagnostic") {
    auto tok = MsTokenizer::build(tok_cfg());
    auto model = StyleVarModel::init(model_cfg());
    // poison a weight every forward pass must traverse
    ParamSet ps = model.base_params();
    const Tensor& hw = ps.find("model/head/w");
    const_cast<Tensor&>(hw).mutable_data()[0] = std::numeric_limits<real>::quiet_NaN();
    SftConfig cfg;
    cfg.augment = false;
    SftTrainer trainer(model, tok, cfg);
    auto data = small_dataset(2, 19);
    std::vector<const Triplet*> batch{&data[0]};
    CHECK_THROWS_AS(trainer.sft_step(batch, 1e-4), Error);
}
