// stylevar CLI: dataset generation, two-stage training, sampling, evaluation
// and the PANW weight table, all driven by one JSON config.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "stylevar/stylevar.hpp"

namespace fs = std::filesystem;
using namespace stylevar;

namespace {

std::string resolve_root(const std::string& path, const char* env_var) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    const char* root = std::getenv(env_var);
    if (!root || !*root) return path;
    return (fs::path(root) / path).string();
}

std::string data_path(const std::string& p) { return resolve_root(p, "STYLEVAR_DATA_ROOT"); }
std::string ckpt_path(const std::string& p) { return resolve_root(p, "STYLEVAR_CKPT_ROOT"); }

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool deterministic = true;
    bool det_set = false;
};

RunConfig load_config(const GlobalOpts& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::from_file(g.config_path);
    if (g.seed_set) {
        cfg.seed = g.seed;
        cfg.data.seed = g.seed;
        cfg.sft.seed = g.seed;
        cfg.grpo.seed = g.seed;
    }
    if (g.det_set) {
        cfg.deterministic = g.deterministic;
        cfg.sft.deterministic = g.deterministic;
    }
    cfg.finalize();
    return cfg;
}

Image sample_image(Session& s, const Triplet& t, std::uint64_t seed, PolicyMode mode) {
    TokenHierarchy style_tokens = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.style));
    TokenHierarchy content_tokens = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.content));
    return generate(s.model, s.tokenizer, style_tokens, content_tokens, t.content, s.cfg.sampler,
                    seed, mode)
        .image;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out) {
    gen_triplets(cfg.data.n, cfg.data.seed, cfg.data.image_size, data_path(out));
    std::cout << "wrote " << cfg.data.n << " triplets to " << data_path(out) << "\n";
    return 0;
}

int cmd_sft(const RunConfig& cfg, const std::string& data_dir, const std::string& out,
            const std::string& init_ckpt) {
    Session s = Session::build(cfg);
    std::uint64_t frozen = s.tokenizer.checksum();
    if (!init_ckpt.empty()) {
        Checkpoint ck = Checkpoint::load(ckpt_path(init_ckpt));
        restore_model(ck, s.model, /*include_adapters=*/false);
    }
    std::vector<Triplet> dataset = load_dataset(data_path(data_dir));
    fs::create_directories(out);
    SftTrainer trainer(s.model, s.tokenizer, cfg.sft);
    trainer.run(dataset, out + "/metrics.csv", [&](const std::string& tag) {
        ParamSet base = s.model.base_params();
        make_checkpoint(cfg, s.model, s.tokenizer, &trainer.optimizer(), &base,
                        trainer.step_count())
            .save(out + "/ckpt_" + tag + ".svar");
    });
    require(s.tokenizer.checksum() == frozen, "sft: frozen tokenizer checksum changed");
    std::cout << "sft done: " << trainer.step_count() << " steps, metrics in " << out
              << "/metrics.csv\n";
    return 0;
}

int cmd_grpo(const RunConfig& cfg, const std::string& data_dir, const std::string& init_ckpt,
             const std::string& out) {
    Session s = Session::build(cfg);
    std::uint64_t frozen = s.tokenizer.checksum();
    require(!init_ckpt.empty(), "grpo: --init checkpoint required (the SFT model)");
    Checkpoint init = Checkpoint::load(ckpt_path(init_ckpt));
    restore_model(init, s.model, /*include_adapters=*/true);
    if (!s.model.has_adapters()) s.model.attach_adapters(cfg.model.adapter_rank);

    std::vector<Triplet> dataset = load_dataset(data_path(data_dir));
    std::vector<const Triplet*> train = split_of(dataset, "train");
    fs::create_directories(out);

    GrpoTrainer trainer(
        s.model, s.tokenizer, train,
        [&](const Trajectory& traj, const Triplet& t) {
            return reward(s.proxy, traj.image, t.target, cfg.grpo.reward_lambda);
        },
        cfg.grpo);

    std::ofstream csv(out + "/metrics.csv");
    require(csv.good(), "grpo: cannot open ", out, "/metrics.csv");
    write_grpo_csv_header(csv);
    for (int i = 0; i < cfg.grpo.steps; ++i) {
        GrpoStepMetrics m = trainer.step();
        if (m.aborted) {
            std::cerr << "step aborted: " << trainer.abort_log() << "\n";
            continue;
        }
        write_grpo_csv_row(csv, m);
        if (m.merge != MergeDecision::None)
            append_merge_audit(out + "/merges.jsonl", m, trainer.merge_state());
    }
    ParamSet ad = s.model.adapter_params();
    make_checkpoint(cfg, s.model, s.tokenizer, &trainer.optimizer(), &ad, trainer.step_count())
        .save(out + "/ckpt_final.svar");
    require(s.tokenizer.checksum() == frozen, "grpo: frozen tokenizer checksum changed");
    std::cout << "grpo done: " << cfg.grpo.steps << " steps, " << trainer.merge_state().merge_count
              << " merges, metrics in " << out << "/metrics.csv\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt,
               int index, const std::string& out, const std::string& mode_name,
               const std::string& traj_out, std::uint64_t seed) {
    Session s = Session::build(cfg);
    if (!ckpt.empty()) {
        Checkpoint ck = Checkpoint::load(ckpt_path(ckpt));
        restore_model(ck, s.model, mode_name != "reference");
    }
    s.model.set_policy_mode(mode_name == "reference" ? PolicyMode::Reference
                                                     : PolicyMode::Current);
    std::vector<Triplet> dataset = load_dataset(data_path(data_dir));
    require(index >= 0 && index < static_cast<int>(dataset.size()), "sample: index ", index,
            " outside dataset of ", dataset.size());
    const Triplet& t = dataset[static_cast<std::size_t>(index)];

    TokenHierarchy style_tokens = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.style));
    TokenHierarchy content_tokens =
        s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.content));
    Trajectory traj = generate(s.model, s.tokenizer, style_tokens, content_tokens, t.content,
                               cfg.sampler, seed, s.model.policy_mode());
    write_ppm(out, traj.image);
    if (!traj_out.empty()) write_trajectory_json(traj, traj_out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt,
             const std::string& split, const std::string& method, const std::string& out) {
    Session s = Session::build(cfg);
    if (!ckpt.empty()) {
        Checkpoint ck = Checkpoint::load(ckpt_path(ckpt));
        restore_model(ck, s.model, /*include_adapters=*/true);
    }
    std::vector<Triplet> dataset = load_dataset(data_path(data_dir));
    std::vector<const Triplet*> items = split_of(dataset, split);
    require(!items.empty(), "eval: split '", split, "' is empty");

    std::function<Image(const Triplet&)> generator;
    if (method == "model") {
        generator = [&](const Triplet& t) {
            return sample_image(s, t, Rng(cfg.seed).derive(static_cast<std::uint64_t>(t.id)).next_u64(),
                                PolicyMode::Current);
        };
    } else if (method == "adain") {
        generator = [](const Triplet& t) { return adain_baseline(t.content, t.style); };
    } else if (method == "identity") {
        generator = [](const Triplet& t) { return t.target; };
    } else {
        fail("eval: unknown method '", method, "' (model|adain|identity)");
    }

    MetricReport report = evaluate(generator, items, s.proxy);
    fs::create_directories(out);
    write_metrics_csv(report, out + "/eval.csv");
    write_metrics_json(report, out + "/eval.json");
    std::cout << "samples " << report.rows.size() << "  style_loss " << report.mean_style_loss
              << "  content_loss " << report.mean_content_loss << "  ssim " << report.mean_ssim
              << "  proxy_perceptual " << report.mean_proxy_perceptual << "\n";
    return 0;
}

int cmd_panw_table(real alpha, const std::string& preset, const std::vector<int>& sides) {
    ScaleSchedule sched = !sides.empty() ? ScaleSchedule(sides)
                          : preset == "toy" ? ScaleSchedule::toy()
                                            : ScaleSchedule::full();
    std::vector<real> w = panw_weights(sched, alpha);
    std::printf("scale tokens w_t w_t_x100\n");
    real sum = 0;
    for (int k = 0; k < sched.num_scales(); ++k) {
        real wt = w[static_cast<std::size_t>(sched.token_offset(k))];
        sum += wt * sched.tokens_at(k);
        std::printf("%d %d %.10g %.2f\n", sched.side(k), sched.tokens_at(k), wt, wt * 100.0);
    }
    std::printf("total_tokens %d sum %.17g\n", sched.total_tokens(), sum);
    return 0;
}

int cmd_gradcheck(real tol) {
    Rng rng(31);
    int failures = 0;
    real worst = 0;
    auto report = [&](const char* name, const GradCheckReport& r) {
        worst = std::max(worst, r.max_rel_err);
        if (!r.pass) ++failures;
        std::printf("%-24s max_rel_err %.3e %s\n", name, r.max_rel_err, r.pass ? "pass" : "FAIL");
    };

    auto rand_t = [&rng](std::vector<int> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (real& v : t.mutable_data()) v = rng.uniform(-1, 1);
        return t;
    };

    {
        Tensor w = rand_t({6, 4});
        Tensor c = rand_t({5, 4});
        report("matmul", grad_check([&](const Tensor& x) { return sum_all(mul(matmul(x, w), c)); },
                                    rand_t({5, 6}), 1e-5, tol));
        report("softmax", grad_check([&](const Tensor& x) { return sum_all(mul(softmax(x), c)); },
                                     rand_t({5, 4}), 1e-5, tol));
        Tensor g = rand_t({4}), b = rand_t({4});
        report("layer_norm",
               grad_check([&](const Tensor& x) { return sum_all(mul(layer_norm(x, g, b), c)); },
                          rand_t({5, 4}), 1e-5, tol));
        report("gelu", grad_check([&](const Tensor& x) { return sum_all(mul(gelu(x), c)); },
                                  rand_t({5, 4}), 1e-5, tol));
        std::vector<int> targets{1, 0, 3, 2, 1};
        report("cross_entropy",
               grad_check([&](const Tensor& x) { return cross_entropy(x, targets); },
                          rand_t({5, 4}), 1e-5, tol));
    }

    // full SFT loss through the model, sampled parameter coordinates
    RunConfig cfg;
    cfg.schedule = ScaleSchedule::toy();
    cfg.tokenizer.d = 8;
    cfg.tokenizer.V = 16;
    cfg.tokenizer.codebook_images = 16;
    cfg.model.embed_dim = 32;
    cfg.model.heads = 4;
    cfg.model.layers = 2;
    cfg.data.image_size = 16;
    cfg.finalize();
    Session s = Session::build(cfg);
    Triplet t = make_triplet(5, 0, 16);
    TokenHierarchy R = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.target));
    TokenHierarchy S = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.style));
    TokenHierarchy C = s.tokenizer.ms_quantize(s.tokenizer.encode_features(t.content));
    ScaleInputs inputs = build_target_inputs(s.tokenizer, R, 4);
    std::vector<int> targets = R.flat();

    auto loss_value = [&]() {
        NoGradScope ng;
        Tensor logits =
            s.model.forward_teacher_forced(t.content, inputs, S, C, PolicyMode::Current);
        return cross_entropy(logits, targets).item();
    };
    ParamSet params = s.model.base_params();
    params.zero_grad();
    {
        Graph g;
        GraphScope scope(g);
        Tensor logits =
            s.model.forward_teacher_forced(t.content, inputs, S, C, PolicyMode::Current);
        backward(g, cross_entropy(logits, targets));
    }
    real max_err = 0;
    const real h = 1e-5;
    Rng pick(77);
    for (int probe = 0; probe < 40; ++probe) {
        std::size_t pi = pick.next_below(params.size());
        Tensor& p = params.tensor(pi);
        std::size_t ci = pick.next_below(p.data().size());
        real saved = p.data()[ci];
        p.mutable_data()[ci] = saved + h;
        real fp = loss_value();
        p.mutable_data()[ci] = saved - h;
        real fm = loss_value();
        p.mutable_data()[ci] = saved;
        real numeric = (fp - fm) / (2 * h);
        real analytic = p.has_grad() ? p.grad()[ci] : 0;
        real err = std::fabs(analytic - numeric) /
                   std::max({real(1), std::fabs(analytic), std::fabs(numeric)});
        max_err = std::max(max_err, err);
    }
    worst = std::max(worst, max_err);
    bool sft_pass = max_err <= tol;
    if (!sft_pass) ++failures;
    std::printf("%-24s max_rel_err %.3e %s (40 sampled coordinates)\n", "sft_loss", max_err,
                sft_pass ? "pass" : "FAIL");
    std::printf("overall max_rel_err %.3e: %s\n", worst, failures == 0 ? "pass" : "FAIL");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stylevar: scale-wise autoregressive style transfer at desk scale"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    app.footer(
        "Config sections (strict keys; defaults in README.md):\n"
        "  schedule   preset full|toy, or sides [...]\n"
        "  tokenizer  d, vocab, seed, kmeans_iters, codebook_images\n"
        "  model      embed_dim, heads, layers, blend_alpha, adapter_rank,\n"
        "             adapter_scaling, start_c1, start_c2, init_std, seed\n"
        "  sampler    top_k, top_p, temperature, argmax\n"
        "  sft        epochs, lr_schedule, batch_size, grad_accum, augment,\n"
        "             clip_norm, adam_beta1/2, weight_decay, seed, val_every\n"
        "  grpo       group_size, clip_ratio, kl_beta, panw_alpha, reward_lambda,\n"
        "             eps_std, ema_decay, tau_gain, tau_patience, cooldown,\n"
        "             emergency_kl, emergency_cooldown, lr, clip_norm,\n"
        "             adam_beta1/2, weight_decay, steps, seed, parallel_rollouts\n"
        "  reward     proxy_seed\n"
        "  data       n, seed, image_size\n"
        "Environment: STYLEVAR_DATA_ROOT, STYLEVAR_CKPT_ROOT prefix relative paths.");

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file (strict keys)");
    auto* seed_opt = app.add_option("--seed", g.seed, "override the stage seed");
    auto* det_opt = app.add_flag("--deterministic,!--no-deterministic", g.deterministic,
                                 "fixed batch assembly order (default on)");

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic triplet dataset");
    std::string gen_out = "data";
    int gen_n = -1;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("-n,--count", gen_n, "number of triplets (overrides config)");

    auto* sft = app.add_subcommand("sft", "stage-1 supervised fine-tuning");
    std::string sft_data = "data", sft_out = "runs/sft", sft_init;
    sft->add_option("--data", sft_data, "dataset directory");
    sft->add_option("--out", sft_out, "output directory");
    sft->add_option("--init", sft_init, "optional initial checkpoint");

    auto* grpo = app.add_subcommand("grpo", "stage-2 GRPO reinforcement fine-tuning");
    std::string grpo_data = "data", grpo_init, grpo_out = "runs/grpo";
    grpo->add_option("--data", grpo_data, "dataset directory");
    grpo->add_option("--init", grpo_init, "SFT checkpoint to start from")->required();
    grpo->add_option("--out", grpo_out, "output directory");

    auto* sample = app.add_subcommand("sample", "stylize one triplet");
    std::string sample_data = "data", sample_ckpt, sample_out = "sample.ppm",
                sample_mode = "current", sample_traj;
    int sample_index = 0;
    sample->add_option("--data", sample_data, "dataset directory");
    sample->add_option("--ckpt", sample_ckpt, "checkpoint to sample from");
    sample->add_option("--index", sample_index, "triplet index");
    sample->add_option("--out", sample_out, "output PPM path");
    sample->add_option("--mode", sample_mode, "current|reference");
    sample->add_option("--dump-trajectory", sample_traj, "write trajectory JSON here");

    auto* eval = app.add_subcommand("eval", "evaluate a generator on a dataset split");
    std::string eval_data = "data", eval_ckpt, eval_split = "val", eval_method = "model",
                eval_out = "runs/eval";
    eval->add_option("--data", eval_data, "dataset directory");
    eval->add_option("--ckpt", eval_ckpt, "checkpoint (for --method model)");
    eval->add_option("--split", eval_split, "train|val");
    eval->add_option("--method", eval_method, "model|adain|identity");
    eval->add_option("--out", eval_out, "output directory");

    auto* panw = app.add_subcommand("panw-table", "print per-token credit weights per scale");
    real panw_alpha = 0.7;
    std::string panw_preset = "full";
    std::vector<int> panw_sides;
    panw->add_option("--alpha", panw_alpha, "weighting exponent");
    panw->add_option("--schedule", panw_preset, "full|toy");
    panw->add_option("--sides", panw_sides, "explicit ascending side lengths");

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    real gc_tol = 1e-5;
    gradcheck_cmd->add_option("--tol", gc_tol, "max relative error tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    g.seed_set = seed_opt->count() > 0;
    g.det_set = det_opt->count() > 0;

    try {
        RunConfig cfg = load_config(g);
        if (gen->parsed()) {
            if (gen_n > 0) cfg.data.n = gen_n;
            return cmd_gen_data(cfg, gen_out);
        }
        if (sft->parsed()) return cmd_sft(cfg, sft_data, sft_out, sft_init);
        if (grpo->parsed()) return cmd_grpo(cfg, grpo_data, grpo_init, grpo_out);
        if (sample->parsed())
            return cmd_sample(cfg, sample_data, sample_ckpt, sample_index, sample_out, sample_mode,
                              sample_traj, g.seed_set ? g.seed : cfg.seed);
        if (eval->parsed())
            return cmd_eval(cfg, eval_data, eval_ckpt, eval_split, eval_method, eval_out);
        if (panw->parsed()) return cmd_panw_table(panw_alpha, panw_preset, panw_sides);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc_tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
