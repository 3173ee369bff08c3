#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stylevar/sampler.hpp"

using namespace stylevar;

namespace {

TokenizerConfig tok_cfg() {
    TokenizerConfig cfg;
    cfg.d = 8;
    cfg.V = 16;
    cfg.image_size = 16;
    cfg.schedule = ScaleSchedule::toy();
    cfg.seed = 42;
    cfg.codebook_images = 16;
    return cfg;
}

ModelConfig model_cfg() {
    ModelConfig cfg;
    cfg.embed_dim = 32;
    cfg.heads = 4;
    cfg.layers = 2;
    cfg.vocab = 16;
    cfg.feature_dim = 8;
    cfg.image_size = 16;
    cfg.schedule = ScaleSchedule::toy();
    cfg.seed = 77;
    return cfg;
}

Image noise_image(int size, std::uint64_t seed) {
    Rng rng(seed);
    Image img(size, size);
    for (real& v : img.data) v = rng.next_double();
    return img;
}

struct Fixture {
    MsTokenizer tok = MsTokenizer::build(tok_cfg());
    StyleVarModel model = StyleVarModel::init(model_cfg());
    Image content = noise_image(16, 1);
    Image style = noise_image(16, 2);
    TokenHierarchy S, C;
    SamplerConfig scfg;

    Fixture() {
        S = tok.ms_quantize(tok.encode_features(style));
        C = tok.ms_quantize(tok.encode_features(content));
        scfg.top_k = 900;  // clamped to V
        scfg.top_p = 0.96;
    }
};

}  // namespace

TEST_CASE("filter_top_k_top_p") {
    SECTION("top_k=1 collapses to one-hot at the argmax") {
        std::vector<real> p{0.1, 0.5, 0.4};
        auto out = filter_top_k_top_p(p, 1, 1.0);
        CHECK(out[0] == 0.0);
        CHECK(out[1] == 1.0);
        CHECK(out[2] == 0.0);
    }
    SECTION("top_k=V, top_p=1 is the identity") {
        std::vector<real> p{0.25, 0.3, 0.2, 0.25};
        auto out = filter_top_k_top_p(p, 4, 1.0);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(out[i] == Catch::Approx(p[i]).epsilon(1e-12));
    }
    SECTION("prefix rule keeps {0.5, 0.3} at top_p=0.7 and renormalizes") {
        std::vector<real> p{0.5, 0.3, 0.2};
        auto out = filter_top_k_top_p(p, 3, 0.7);
        CHECK(out[0] == Catch::Approx(0.625).epsilon(1e-12));
        CHECK(out[1] == Catch::Approx(0.375).epsilon(1e-12));
        CHECK(out[2] == 0.0);
    }
    SECTION("ties break toward the lower token index") {
        std::vector<real> p{0.25, 0.25, 0.25, 0.25};
        auto out = filter_top_k_top_p(p, 4, 0.5);
        CHECK(out[0] == Catch::Approx(0.5).epsilon(1e-12));
        CHECK(out[1] == Catch::Approx(0.5).epsilon(1e-12));
        CHECK(out[2] == 0.0);
        CHECK(out[3] == 0.0);
    }
    SECTION("support never exceeds min(top_k, V) and the output sums to 1") {
        Rng rng(4);
        for (int trial = 0; trial < 50; ++trial) {
            int v = 2 + static_cast<int>(rng.next_below(40));
            std::vector<real> p(static_cast<std::size_t>(v));
            real sum = 0;
            for (real& x : p) {
                x = rng.next_double() + 1e-6;
                sum += x;
            }
            for (real& x : p) x /= sum;
            int top_k = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v) + 5));
            real top_p = rng.uniform(0.05, 1.0);
            auto out = filter_top_k_top_p(p, top_k, top_p);
            real osum = 0;
            int support = 0;
            for (real x : out) {
                osum += x;
                if (x > 0) ++support;
            }
            CHECK(std::fabs(osum - 1.0) <= 1e-9);
            CHECK(support <= std::min(top_k, v));
        }
    }
    SECTION("bad inputs are rejected") {
        CHECK_THROWS_AS(filter_top_k_top_p({0.0, 0.0}, 1, 0.9), Error);
        CHECK_THROWS_AS(filter_top_k_top_p({0.5, 0.4}, 1, 0.9), Error);  // sums to 0.9
    }
}

TEST_CASE("generate") {
    Fixture f;
    SECTION("same seed twice gives bit-identical tokens and images") {
        Trajectory a = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 123);
        Trajectory b = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 123);
        CHECK(a.tokens.maps == b.tokens.maps);
        CHECK(a.image.data == b.image.data);
        CHECK(a.logp_full == b.logp_full);
        Trajectory c = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 124);
        CHECK(a.tokens.maps != c.tokens.maps);
    }
    SECTION("argmax mode equals greedy decoding") {
        SamplerConfig greedy = f.scfg;
        greedy.argmax = true;
        Trajectory a = generate(f.model, f.tok, f.S, f.C, f.content, greedy, 5);
        Trajectory b = generate(f.model, f.tok, f.S, f.C, f.content, greedy, 999);
        CHECK(a.tokens.maps == b.tokens.maps);  // seed-independent
        // greedy == top_k=1 sampling
        SamplerConfig k1 = f.scfg;
        k1.top_k = 1;
        Trajectory c = generate(f.model, f.tok, f.S, f.C, f.content, k1, 7);
        CHECK(a.tokens.maps == c.tokens.maps);
    }
    SECTION("toy schedule trajectory holds exactly 30 tokens") {
        Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 11);
        CHECK(t.tokens.total_tokens() == 30);
        CHECK(t.logp_full.size() == 30);
        CHECK(t.logp_sampling.size() == 30);
        for (real lp : t.logp_full) CHECK(std::isfinite(lp));
    }
    SECTION("accumulation identity: decode of trajectory tokens reproduces the image") {
        Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 13);
        auto [acc, img] = f.tok.accumulate_decode(t.tokens);
        CHECK(img.data == t.image.data);
    }
}

TEST_CASE("trajectory json dump") {
    Fixture f;
    Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 31);
    auto path = std::filesystem::temp_directory_path() / "svar_traj.json";
    write_trajectory_json(t, path.string());
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"seed\": 31") != std::string::npos);
    CHECK(text.find("\"tokens\"") != std::string::npos);
    CHECK(text.find("\"logp_full\"") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_CASE("teacher-forced scoring") {
    Fixture f;
    SECTION("current-mode scoring matches the sampler's full-distribution log-probs") {
        SamplerConfig nofilter;
        nofilter.top_k = 16;
        nofilter.top_p = 1.0;
        nofilter.temperature = 1.0;
        Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, nofilter, 21);
        std::vector<real> scored = teacher_forced_logprobs(f.model, f.tok, t.tokens, f.S, f.C,
                                                           f.content, PolicyMode::Current);
        REQUIRE(scored.size() == t.logp_full.size());
        real max_err = 0;
        for (std::size_t i = 0; i < scored.size(); ++i)
            max_err = std::max(max_err, std::fabs(scored[i] - t.logp_full[i]));
        CHECK(max_err <= 1e-9);
    }
    SECTION("with filtering on, sampling log-probs differ from full but scoring still matches full") {
        Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 22);
        std::vector<real> scored = teacher_forced_logprobs(f.model, f.tok, t.tokens, f.S, f.C,
                                                           f.content, PolicyMode::Current);
        real max_err = 0;
        for (std::size_t i = 0; i < scored.size(); ++i)
            max_err = std::max(max_err, std::fabs(scored[i] - t.logp_full[i]));
        CHECK(max_err <= 1e-9);
    }
    SECTION("zero-init adapters: current and reference log-probs identical") {
        f.model.attach_adapters(4);
        Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 23);
        auto cur = teacher_forced_logprobs(f.model, f.tok, t.tokens, f.S, f.C, f.content,
                                           PolicyMode::Current);
        auto ref = teacher_forced_logprobs(f.model, f.tok, t.tokens, f.S, f.C, f.content,
                                           PolicyMode::Reference);
        CHECK(cur == ref);
    }
    SECTION("shuffling final-scale tokens does not change earlier-scale log-probs") {
        Trajectory t = generate(f.model, f.tok, f.S, f.C, f.content, f.scfg, 24);
        auto base = teacher_forced_logprobs(f.model, f.tok, t.tokens, f.S, f.C, f.content,
                                            PolicyMode::Current);
        TokenHierarchy shuffled = t.tokens;
        std::reverse(shuffled.maps[3].begin(), shuffled.maps[3].end());
        auto pert = teacher_forced_logprobs(f.model, f.tok, shuffled, f.S, f.C, f.content,
                                            PolicyMode::Current);
        for (int i = 0; i < 14; ++i)  // scales 1..3 occupy rows [0,14)
            CHECK(base[static_cast<std::size_t>(i)] == pert[static_cast<std::size_t>(i)]);
    }
}
