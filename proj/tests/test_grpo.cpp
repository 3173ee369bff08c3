#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stylevar/grpo.hpp"

using namespace stylevar;

TEST_CASE("advantage") {
    SECTION("equal rewards give zero advantages") {
        auto a = advantage({2.0, 2.0, 2.0, 2.0}, 1e-4);
        for (real v : a) CHECK(v == 0.0);
    }
    SECTION("[1,2,3] with eps_std=0 gives +-1.2247") {
        auto a = advantage({1.0, 2.0, 3.0}, 0.0);
        // population std = sqrt(2/3); (3-2)/sqrt(2/3) = sqrt(1.5)
        CHECK(a[0] == Catch::Approx(-1.224744871391589).epsilon(1e-12));
        CHECK(a[1] == Catch::Approx(0.0).margin(1e-15));
        CHECK(a[2] == Catch::Approx(1.224744871391589).epsilon(1e-12));
    }
    SECTION("shift invariance is exact on exactly-representable rewards") {
        std::vector<real> r{0.25, -1.5, 0.75, 2.0};
        std::vector<real> shifted;
        for (real v : r) shifted.push_back(v + 10.0);
        auto a = advantage(r, 1e-4);
        auto b = advantage(shifted, 1e-4);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    SECTION("positive scale invariance is exact at eps_std=0") {
        std::vector<real> r{0.3, -1.2, 0.8, 2.0};
        std::vector<real> scaled;
        for (real v : r) scaled.push_back(v * 4.0);
        auto a = advantage(r, 0.0);
        auto b = advantage(scaled, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    SECTION("shift invariance within fp tolerance on arbitrary rewards") {
        std::vector<real> r{0.3, -1.2, 0.8, 2.0};
        std::vector<real> shifted;
        for (real v : r) shifted.push_back(v + 10.0);
        auto a = advantage(r, 1e-4);
        auto b = advantage(shifted, 1e-4);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i] == Catch::Approx(b[i]).margin(1e-12));
    }
    SECTION("zero mean within 1e-9 when std > 0") {
        auto a = advantage({0.11, 0.52, -0.95, 1.4, 0.33}, 0.0);
        real sum = 0;
        for (real v : a) sum += v;
        CHECK(std::fabs(sum) <= 1e-9);
    }
    SECTION("group of one is rejected") { CHECK_THROWS_AS(advantage({1.0}, 0.0), Error); }
}

TEST_CASE("panw weights") {
    ScaleSchedule full = ScaleSchedule::full();
    auto w = panw_weights(full, 0.7);
    REQUIRE(w.size() == 680);

    SECTION("reproduces all ten reference weights at alpha=0.7") {
        // (h_k w_k)^-0.7 / Z, displayed as x 10^-2 to two decimals
        const real expected[10] = {3.37, 1.28, 0.72, 0.48, 0.35, 0.27, 0.18, 0.13, 0.09, 0.07};
        for (int k = 0; k < 10; ++k) {
            real per_token = w[static_cast<std::size_t>(full.token_offset(k))] * 100.0;
            CHECK(per_token == Catch::Approx(expected[k]).margin(0.005));
        }
    }
    SECTION("weights sum to 1 within 1e-12") {
        real sum = 0;
        for (real v : w) sum += v;
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
    SECTION("per-token weight is non-increasing in scale size") {
        for (int k = 1; k < 10; ++k)
            CHECK(w[static_cast<std::size_t>(full.token_offset(k))] <=
                  w[static_cast<std::size_t>(full.token_offset(k - 1))]);
    }
    SECTION("coarse/fine rebalance ratios") {
        real w1 = w[0];
        real w16 = w[static_cast<std::size_t>(full.token_offset(9))];
        // per-token ratio = 16^1.4 ~ 48.5, not 256
        CHECK(w1 / w16 == Catch::Approx(std::pow(16.0, 1.4)).epsilon(1e-9));
        CHECK(w1 / w16 == Catch::Approx(48.5).margin(0.1));
        // total scale-16 mass over total scale-1 mass = 256^0.3 ~ 5.28
        CHECK(256.0 * w16 / w1 == Catch::Approx(std::pow(256.0, 0.3)).epsilon(1e-9));
        CHECK(256.0 * w16 / w1 == Catch::Approx(5.278).margin(0.01));
    }
    SECTION("alpha=0 gives uniform 1/680") {
        auto u = panw_weights(full, 0.0);
        for (real v : u) CHECK(v == Catch::Approx(1.0 / 680.0).epsilon(1e-12));
    }
}

TEST_CASE("k3 estimator") {
    SECTION("zero at equal log-probs") { CHECK(k3_kl(-1.7, -1.7) == 0.0); }
    SECTION("delta = ln 2") {
        CHECK(k3_kl(std::log(2.0) - 1.0, -1.0) ==
              Catch::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-12));
        CHECK(k3_kl(std::log(2.0) - 1.0, -1.0) == Catch::Approx(0.3068528194400547).epsilon(1e-12));
    }
    SECTION("delta = -0.5") {
        CHECK(k3_kl(-1.5, -1.0) == Catch::Approx(std::exp(-0.5) + 0.5 - 1.0).epsilon(1e-12));
        CHECK(k3_kl(-1.5, -1.0) == Catch::Approx(0.1065306597126334).epsilon(1e-12));
    }
    SECTION("non-negative on 1e5 random pairs, zero iff equal") {
        Rng rng(2718);
        int zeros = 0;
        for (int i = 0; i < 100000; ++i) {
            real a = -10.0 * rng.next_double();
            real b = -10.0 * rng.next_double();
            real v = k3_kl(a, b);
            CHECK(v >= 0.0);
            if (v == 0.0) {
                ++zeros;
                CHECK(a == b);
            }
        }
        INFO("exact zeros among random pairs: " << zeros);
        CHECK(k3_kl(-3.25, -3.25) == 0.0);
    }
}

TEST_CASE("clipped surrogate") {
    SECTION("rho=1 gives -A for any epsilon") {
        for (real eps : {0.1, 0.2, 0.5})
            for (real a : {-2.0, -0.5, 0.0, 0.7, 3.0}) CHECK(clipped_pg(1.0, a, eps) == -a);
    }
    SECTION("rho=1.5, A=1, eps=0.2 clips to -1.2") {
        CHECK(std::fabs(clipped_pg(1.5, 1.0, 0.2) - (-1.2)) <= 1e-12);
    }
    SECTION("rho=1.5, A=-1, eps=0.2 keeps the pessimistic 1.5") {
        CHECK(std::fabs(clipped_pg(1.5, -1.0, 0.2) - 1.5) <= 1e-12);
    }
    SECTION("non-positive rho is rejected") {
        CHECK_THROWS_AS(clipped_pg(0.0, 1.0, 0.2), Error);
    }
}

TEST_CASE("grpo_loss") {
    GrpoConfig cfg;
    cfg.clip_ratio = 0.2;
    cfg.kl_beta = 0.1;
    SECTION("zero advantages and pi_theta == pi_ref give zero loss") {
        GrpoBatch b;
        b.advantages = {0.0, 0.0};
        b.logp_theta = {{-1.0, -2.0}, {-0.5, -0.3}};
        b.logp_old = {{-1.1, -2.2}, {-0.6, -0.2}};
        b.logp_ref = b.logp_theta;
        b.panw = {0.6, 0.4};
        CHECK(grpo_loss(b, cfg) == 0.0);
    }
    SECTION("beta=0 reduces to the PANW-weighted clipped PG") {
        GrpoBatch b;
        b.advantages = {1.5, -0.7};
        b.logp_theta = {{-1.0, -2.0}, {-0.5, -0.3}};
        b.logp_old = {{-1.2, -1.9}, {-0.5, -0.45}};
        b.logp_ref = {{-1.05, -2.1}, {-0.55, -0.25}};
        b.panw = {0.6, 0.4};
        GrpoConfig nokl = cfg;
        nokl.kl_beta = 0.0;
        real expected = 0;
        for (int i = 0; i < 2; ++i)
            for (int t = 0; t < 2; ++t)
                expected += b.panw[static_cast<std::size_t>(t)] *
                            clipped_pg(std::exp(b.logp_theta[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] -
                                                b.logp_old[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]),
                                       b.advantages[static_cast<std::size_t>(i)], 0.2);
        expected /= 2;
        CHECK(grpo_loss(b, nokl) == Catch::Approx(expected).epsilon(1e-15));
    }
    SECTION("hand-built 2-trajectory 2-token batch matches a spreadsheet evaluation") {
        GrpoBatch b;
        b.advantages = {1.0, -1.0};
        b.logp_theta = {{-1.0, -2.0}, {-0.5, -1.5}};
        b.logp_old = {{-1.3, -1.8}, {-0.5, -1.2}};
        b.logp_ref = {{-0.9, -2.3}, {-0.6, -1.4}};
        b.panw = {0.7, 0.3};

        // spreadsheet arithmetic, written out term by term
        auto cell = [](real lt, real lo, real lref, real adv, real w) {
            real rho = std::exp(lt - lo);
            real lo_clip = rho < 0.8 ? 0.8 : (rho > 1.2 ? 1.2 : rho);
            real pg = -std::min(rho * adv, lo_clip * adv);
            real d = lref - lt;
            real kl = std::exp(d) - d - 1.0;
            return w * (pg + 0.1 * kl);
        };
        real expected = 0.5 * (cell(-1.0, -1.3, -0.9, 1.0, 0.7) + cell(-2.0, -1.8, -2.3, 1.0, 0.3) +
                               cell(-0.5, -0.5, -0.6, -1.0, 0.7) + cell(-1.5, -1.2, -1.4, -1.0, 0.3));
        CHECK(grpo_loss(b, cfg) == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("merge audit lines are valid json with step and type") {
    auto path = std::filesystem::temp_directory_path() / "svar_merges.jsonl";
    std::filesystem::remove(path);
    GrpoStepMetrics m;
    m.step = 42;
    m.merge = MergeDecision::Emergency;
    MergeState st;
    st.ema = -0.5;
    st.last_raw_kl = 2.5;
    st.merge_count = 1;
    append_merge_audit(path.string(), m, st);
    m.step = 99;
    m.merge = MergeDecision::Normal;
    append_merge_audit(path.string(), m, st);

    std::ifstream f(path);
    std::string line;
    int lines = 0;
    while (std::getline(f, line)) {
        ++lines;
        CHECK(line.find("\"step\":") != std::string::npos);
        CHECK((line.find("\"emergency\"") != std::string::npos ||
               line.find("\"normal\"") != std::string::npos));
    }
    CHECK(lines == 2);
    std::filesystem::remove(path);
}

TEST_CASE("reward failure aborts the step and is logged") {
    TokenizerConfig tcfg;
    tcfg.d = 8;
    tcfg.V = 16;
    tcfg.image_size = 16;
    tcfg.schedule = ScaleSchedule::toy();
    tcfg.seed = 42;
    tcfg.codebook_images = 16;
    auto tok = MsTokenizer::build(tcfg);
    ModelConfig mcfg;
    mcfg.embed_dim = 32;
    mcfg.heads = 4;
    mcfg.layers = 1;
    mcfg.vocab = 16;
    mcfg.feature_dim = 8;
    mcfg.image_size = 16;
    mcfg.schedule = ScaleSchedule::toy();
    mcfg.adapter_rank = 2;
    auto model = StyleVarModel::init(mcfg);
    model.attach_adapters(2);

    std::vector<Triplet> data{make_triplet(3, 0, 16)};
    data[0].split = "train";
    std::vector<const Triplet*> train{&data[0]};
    GrpoConfig gcfg;
    gcfg.group_size = 2;
    GrpoTrainer trainer(model, tok, train,
                        [](const Trajectory&, const Triplet&) -> real {
                            throw Error("reward backend unavailable");
                        },
                        gcfg);
    GrpoStepMetrics m = trainer.step();
    CHECK(m.aborted);
    CHECK(trainer.abort_log().find("reward backend unavailable") != std::string::npos);
}

TEST_CASE("merge state machine") {
    GrpoConfig cfg;
    cfg.ema_decay = 0.0;  // scripted traces drive the EMA directly
    cfg.tau_gain = 0.05;
    cfg.tau_patience = 50;
    cfg.cooldown = 300;
    cfg.emergency_kl = 2.0;
    cfg.emergency_cooldown = 50;

    SECTION("gain below tau_gain never merges") {
        MergeState st;
        update_merge_state(st, 0.0, 0.0, cfg);  // baseline 0
        for (int i = 0; i < 2000; ++i)
            CHECK(update_merge_state(st, 0.04, 0.0, cfg) == MergeDecision::None);
        CHECK(st.merge_count == 0);
    }
    SECTION("gain sustained only 49 steps then dropping never merges") {
        MergeState st;
        update_merge_state(st, 0.0, 0.0, cfg);
        for (int cycle = 0; cycle < 20; ++cycle) {
            for (int i = 0; i < 49; ++i)
                CHECK(update_merge_state(st, 0.06, 0.0, cfg) == MergeDecision::None);
            CHECK(update_merge_state(st, 0.0, 0.0, cfg) == MergeDecision::None);
        }
        CHECK(st.merge_count == 0);
    }
    SECTION("sustained gain after cool-down triggers exactly one normal merge") {
        MergeState st;
        update_merge_state(st, 0.0, 0.0, cfg);
        int merges = 0;
        long merge_step = -1;
        for (int i = 1; i <= 400; ++i) {
            MergeDecision d = update_merge_state(st, 0.06, 0.0, cfg);
            if (d == MergeDecision::Normal) {
                ++merges;
                merge_step = i;
            }
            CHECK(d != MergeDecision::Emergency);
        }
        CHECK(merges == 1);
        // patience is satisfied at step 50 but the cool-down holds it to 300
        CHECK(merge_step == 300 - 1);  // baseline step consumed one tick
        // after the merge the baseline moved up to the EMA: no further merges
        for (int i = 0; i < 299; ++i)
            CHECK(update_merge_state(st, 0.06, 0.0, cfg) == MergeDecision::None);
    }
    SECTION("KL spike outside cool-down fires exactly one emergency merge") {
        MergeState st;
        update_merge_state(st, 0.0, 0.0, cfg);
        for (int i = 0; i < 100; ++i)
            CHECK(update_merge_state(st, 0.0, 0.1, cfg) == MergeDecision::None);
        CHECK(update_merge_state(st, 0.0, 2.5, cfg) == MergeDecision::Emergency);
        // inside the 50-step emergency cool-down a second spike is suppressed
        for (int i = 0; i < 49; ++i)
            CHECK(update_merge_state(st, 0.0, 2.5, cfg) == MergeDecision::None);
        CHECK(update_merge_state(st, 0.0, 2.5, cfg) == MergeDecision::Emergency);
        CHECK(st.merge_count == 2);
    }
}
