#include <catch2/catch_amalgamated.hpp>

#include "stylevar/optim.hpp"

using namespace stylevar;

namespace {
ParamSet one_param(real w, real g) {
    ParamSet ps;
    Tensor t = Tensor::from({1}, {w}, true);
    t.mutable_grad().assign(1, g);
    ps.add("w", t);
    return ps;
}
}  // namespace

TEST_CASE("adamw first step matches hand evaluation") {
    // m=0.1, v=0.05, bias-corrected mhat=vhat=1, update = lr/(1+eps)
    ParamSet ps = one_param(1.0, 1.0);
    AdamW opt(ps, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.95, .eps = 1e-8, .weight_decay = 0.0});
    opt.step(ps);
    real expected = 1.0 - 0.1 / (1.0 + 1e-8);
    CHECK(ps.tensor(0).data()[0] == Catch::Approx(expected).epsilon(1e-12));
    CHECK(ps.tensor(0).data()[0] == Catch::Approx(0.9).margin(1e-7));
}

TEST_CASE("adamw decoupled weight decay") {
    ParamSet ps = one_param(1.0, 1.0);
    AdamW opt(ps, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.95, .eps = 1e-8, .weight_decay = 0.01});
    opt.step(ps);
    real expected = 1.0 * (1.0 - 0.1 * 0.01) - 0.1 / (1.0 + 1e-8);
    CHECK(ps.tensor(0).data()[0] == Catch::Approx(expected).epsilon(1e-12));
    CHECK(ps.tensor(0).data()[0] == Catch::Approx(0.899).margin(1e-7));
}

TEST_CASE("adamw zero gradient and zero decay leaves params unchanged") {
    ParamSet ps = one_param(1.0, 0.0);
    AdamW opt(ps, {.lr = 0.1, .weight_decay = 0.0});
    opt.step(ps);
    CHECK(ps.tensor(0).data()[0] == 1.0);
}

TEST_CASE("adamw with lr=0 is the identity on params") {
    ParamSet ps = one_param(0.7, 2.5);
    AdamW opt(ps, {.lr = 0.0, .weight_decay = 0.01});
    opt.step(ps);
    CHECK(ps.tensor(0).data()[0] == 0.7);
}

TEST_CASE("adamw requires populated grads") {
    ParamSet ps;
    ps.add("w", Tensor::from({1}, {1.0}, true));
    AdamW opt(ps, {});
    try {
        opt.step(ps);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
}

TEST_CASE("clip_global_norm") {
    SECTION("scales down when norm exceeds max") {
        ParamSet ps;
        Tensor t = Tensor::from({2}, {0.0, 0.0}, true);
        t.mutable_grad() = {3.0, 4.0};
        ps.add("g", t);
        real norm = clip_global_norm(ps, 1.0);
        CHECK(norm == Catch::Approx(5.0).epsilon(1e-12));
        CHECK(ps.tensor(0).grad()[0] == Catch::Approx(0.6).epsilon(1e-12));
        CHECK(ps.tensor(0).grad()[1] == Catch::Approx(0.8).epsilon(1e-12));
    }
    SECTION("leaves small gradients unchanged") {
        ParamSet ps = one_param(0.0, 0.1);
        clip_global_norm(ps, 1.0);
        CHECK(ps.tensor(0).grad()[0] == 0.1);
    }
    SECTION("all-zero grads do not divide by zero") {
        ParamSet ps = one_param(0.0, 0.0);
        CHECK_NOTHROW(clip_global_norm(ps, 1.0));
        CHECK(ps.tensor(0).grad()[0] == 0.0);
    }
}
