#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "stylevar/session.hpp"
#include "stylevar/sft.hpp"

using namespace stylevar;
namespace fs = std::filesystem;

namespace {

RunConfig toy_cfg() {
    RunConfig cfg;
    cfg.schedule = ScaleSchedule::toy();
    cfg.tokenizer.d = 8;
    cfg.tokenizer.V = 32;
    cfg.tokenizer.codebook_images = 16;
    cfg.model.embed_dim = 32;
    cfg.model.heads = 4;
    cfg.model.layers = 2;
    cfg.model.adapter_rank = 4;
    cfg.data.image_size = 16;
    cfg.sft.augment = false;
    cfg.finalize();
    return cfg;
}

std::vector<char> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config round trips through json with strict keys") {
    RunConfig cfg = toy_cfg();
    nlohmann::json j = cfg.to_json();
    RunConfig back = RunConfig::from_json(j);
    CHECK(back.schedule == cfg.schedule);
    CHECK(back.tokenizer.V == cfg.tokenizer.V);
    CHECK(back.model.embed_dim == cfg.model.embed_dim);
    CHECK(back.sft.lr_schedule.size() == cfg.sft.lr_schedule.size());

    SECTION("unknown keys are rejected with the key path") {
        j["grpo"]["klbeta"] = 0.2;  // drifted hyperparameter name
        try {
            RunConfig::from_json(j);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("grpo.klbeta") != std::string::npos);
        }
    }
    SECTION("top-level unknown key rejected") {
        nlohmann::json j2 = cfg.to_json();
        j2["scheduler"] = nlohmann::json::object();
        CHECK_THROWS_AS(RunConfig::from_json(j2), Error);
    }
}

TEST_CASE("full training state round trips through the checkpoint container") {
    fs::path dir = fs::temp_directory_path() / "svar_session";
    fs::create_directories(dir);
    RunConfig cfg = toy_cfg();
    Session s = Session::build(cfg);

    std::vector<Triplet> data;
    for (int i = 0; i < 3; ++i) {
        Triplet t = make_triplet(7, i, 16);
        t.split = "train";
        data.push_back(std::move(t));
    }
    std::vector<const Triplet*> batch{&data[0], &data[1], &data[2]};

    SftTrainer trainer(s.model, s.tokenizer, cfg.sft);
    for (int i = 0; i < 5; ++i) trainer.sft_step(batch, 1e-3);

    ParamSet base = s.model.base_params();
    std::string p1 = (dir / "a.svar").string();
    make_checkpoint(cfg, s.model, s.tokenizer, &trainer.optimizer(), &base, trainer.step_count())
        .save(p1);

    SECTION("resume reproduces the next-step loss bit-exactly") {
        real next_loss_direct = trainer.sft_step(batch, 1e-3).loss;

        Checkpoint ck = Checkpoint::load(p1);
        Session s2 = Session::build(cfg);
        MsTokenizer tok2 = restore_tokenizer(ck, cfg.tokenizer);
        CHECK(tok2.checksum() == s.tokenizer.checksum());
        restore_model(ck, s2.model, /*include_adapters=*/false);
        SftTrainer trainer2(s2.model, tok2, cfg.sft);
        ParamSet base2 = s2.model.base_params();
        restore_optimizer(ck, trainer2.optimizer(), base2);
        trainer2.set_step_count(restored_trainer_step(ck));
        real next_loss_resumed = trainer2.sft_step(batch, 1e-3).loss;
        CHECK(next_loss_resumed == next_loss_direct);
    }

    SECTION("save -> load -> save is byte-identical") {
        Checkpoint ck = Checkpoint::load(p1);
        std::string p2 = (dir / "b.svar").string();
        ck.save(p2);
        CHECK(read_bytes(p1) == read_bytes(p2));
    }

    SECTION("reference-mode loading skips the adapter namespace cleanly") {
        s.model.attach_adapters(cfg.model.adapter_rank);
        ParamSet ad = s.model.adapter_params();
        Rng rng(3);
        for (std::size_t i = 0; i < ad.size(); ++i)
            for (real& v : ad.tensor(i).mutable_data()) v = 0.01 * rng.next_normal();
        std::string p3 = (dir / "c.svar").string();
        make_checkpoint(cfg, s.model, s.tokenizer, nullptr, nullptr, 0).save(p3);

        Checkpoint ck = Checkpoint::load(p3);
        REQUIRE(ck.has("adapter/block0/self_q/down"));
        Session ref = Session::build(cfg);
        restore_model(ck, ref.model, /*include_adapters=*/false);
        CHECK_FALSE(ref.model.has_adapters());

        Session cur = Session::build(cfg);
        restore_model(ck, cur.model, /*include_adapters=*/true);
        REQUIRE(cur.model.has_adapters());
        // reference-mode forward of the adapter-loaded model equals the
        // adapter-free load
        Triplet& t = data[0];
        TokenHierarchy R = cur.model.config().schedule == ScaleSchedule::toy()
                               ? s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.target))
                               : TokenHierarchy{};
        TokenHierarchy S = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.style));
        TokenHierarchy C = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.content));
        ScaleInputs in = build_target_inputs(s.tokenizer, R, 4);
        NoGradScope ng;
        Tensor a = ref.model.forward_teacher_forced(t.content, in, S, C, PolicyMode::Current);
        Tensor b = cur.model.forward_teacher_forced(t.content, in, S, C, PolicyMode::Reference);
        CHECK(a.data() == b.data());
    }
    fs::remove_all(dir);
}
