#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stylevar/image.hpp"
#include "stylevar/optim.hpp"
#include "stylevar/schedule.hpp"
#include "stylevar/tensor.hpp"
#include "stylevar/tokenizer.hpp"

namespace stylevar {

// current: base + adapter delta. reference: base only (adapter path skipped).
// The rollout snapshot policy is realized as cached log-probs at rollout
// time, not as a third weight copy.
enum class PolicyMode { Current, Reference };

struct ModelConfig {
    int embed_dim = 128;
    int heads = 4;
    int layers = 4;
    int vocab = 64;
    int feature_dim = 16;  // tokenizer d
    int image_size = 32;   // start-token encoder input
    ScaleSchedule schedule = ScaleSchedule::full();
    std::vector<real> blend_alpha;  // per scale; empty = linear ramp 0.2 -> 0.8
    int adapter_rank = 8;
    real adapter_scaling = real(2);  // alpha/r
    int start_c1 = 8;
    int start_c2 = 16;
    real init_std = real(0.02);
    std::uint64_t seed = 1234;

    void validate() const {
        require(embed_dim > 0 && embed_dim % heads == 0, "model: embed_dim ", embed_dim,
                " not divisible by ", heads, " heads");
        require(layers > 0 && vocab > 1 && feature_dim > 0, "model: bad dimensions");
        if (!blend_alpha.empty()) {
            require(static_cast<int>(blend_alpha.size()) == schedule.num_scales(),
                    "model: blend_alpha has ", blend_alpha.size(), " entries for ",
                    schedule.num_scales(), " scales");
            for (real a : blend_alpha)
                require(a >= 0 && a <= 1, "model: blend_alpha out of [0,1]: ", a);
        }
        require(adapter_rank >= 0 && adapter_scaling > 0, "model: bad adapter settings");
    }

    // Scale-dependent blending coefficient (0-based k).
    real alpha(int k) const {
        require(k >= 0 && k < schedule.num_scales(), "alpha: scale ", k, " out of schedule");
        if (!blend_alpha.empty()) return blend_alpha[static_cast<std::size_t>(k)];
        int K = schedule.num_scales();
        if (K == 1) return real(0.2);
        return real(0.2) + real(0.6) * static_cast<real>(k) / static_cast<real>(K - 1);
    }
};

// Linear layer with an optional low-rank adapter. Weight layout is (in, out)
// so rows flow through matmul directly; the adapter delta is
// scale * x @ down @ up with up zero-initialized.
struct Linear {
    Tensor weight;  // (in, out)
    Tensor bias;    // (out)
    bool adapted = false;
    Tensor lora_down;  // (in, r)
    Tensor lora_up;    // (r, out)
    real lora_scale = 0;

    static Linear init(int in, int out, Rng& rng, real std0) {
        Linear l;
        l.weight = Tensor::randn({in, out}, rng, std0, true);
        l.bias = Tensor::zeros({out}, true);
        return l;
    }

    Tensor apply(const Tensor& x, PolicyMode mode) const {
        Tensor y = add(matmul(x, weight), bias);
        if (adapted && mode == PolicyMode::Current)
            y = add(y, scalar_mul(matmul(matmul(x, lora_down), lora_up), lora_scale));
        return y;
    }

    void attach_adapter(int rank, real scale, Rng& rng) {
        int in = weight.dim(0), out = weight.dim(1);
        lora_down = Tensor::randn({in, rank}, rng, real(1) / std::sqrt(static_cast<real>(in)), true);
        lora_up = Tensor::zeros({rank, out}, true);
        lora_scale = scale;
        adapted = true;
    }

    // base += scale * down @ up, then the adapter restarts from zero delta.
    void merge_adapter(Rng& rng) {
        int in = weight.dim(0), out = weight.dim(1);
        int r = lora_down.dim(1);
        std::vector<real>& w = weight.mutable_data();
        for (int i = 0; i < in; ++i)
            for (int j = 0; j < out; ++j) {
                real acc = 0;
                for (int k = 0; k < r; ++k)
                    acc += lora_down.data()[static_cast<std::size_t>(i) * r + k] *
                           lora_up.data()[static_cast<std::size_t>(k) * out + j];
                w[static_cast<std::size_t>(i) * out + j] += lora_scale * acc;
            }
        for (real& v : lora_down.mutable_data())
            v = static_cast<real>(rng.next_normal()) / std::sqrt(static_cast<real>(in));
        for (real& v : lora_up.mutable_data()) v = 0;
    }
};

// Continuous target-stream inputs per scale; index 0 is unused (the start
// token takes its place).
struct ScaleInputs {
    std::vector<std::vector<real>> feats;  // feats[k]: (s_k*s_k) x feature_dim
};

// Teacher-forcing input construction: inputs to stage k are the accumulated
// features of scales < k, downsampled to the k-th resolution. Shared between
// training (ground-truth tokens) and scoring (sampled tokens).
inline ScaleInputs build_target_inputs(const MsTokenizer& tok, const TokenHierarchy& tokens,
                                       int upto) {
    const ScaleSchedule& sched = tok.schedule();
    require(static_cast<int>(tokens.maps.size()) >= upto, "build_target_inputs: hierarchy has ",
            tokens.maps.size(), " scales, need ", upto);
    ScaleInputs in;
    in.feats.resize(static_cast<std::size_t>(upto));
    int side = sched.final_side();
    FeatureMap acc(side, side, tok.config().d);
    for (int k = 0; k < upto; ++k) {
        int s = sched.side(k);
        if (k > 0) in.feats[static_cast<std::size_t>(k)] = resample(acc.data, side, side, acc.d, s, s);
        tok.add_scale(acc, tokens.maps[static_cast<std::size_t>(k)], k);
    }
    return in;
}

class StyleVarModel {
public:
    static StyleVarModel init(const ModelConfig& cfg) {
        cfg.validate();
        StyleVarModel m;
        m.cfg_ = cfg;
        Rng rng = Rng(cfg.seed).derive(0x3de1);
        int D = cfg.embed_dim;

        m.token_embed_ = Tensor::randn({cfg.vocab, D}, rng, cfg.init_std, true);
        m.cond_stream_embed_ = Tensor::randn({D}, rng, cfg.init_std, true);
        m.level_embed_ = Tensor::randn({cfg.schedule.num_scales(), D}, rng, cfg.init_std, true);
        m.row_embed_ = Tensor::randn({cfg.schedule.final_side(), D}, rng, cfg.init_std, true);
        m.col_embed_ = Tensor::randn({cfg.schedule.final_side(), D}, rng, cfg.init_std, true);
        m.feat_in_ = Linear::init(cfg.feature_dim, D, rng, cfg.init_std);

        m.start_conv1_ = Linear::init(9 * 3, cfg.start_c1, rng, cfg.init_std);
        m.start_conv2_ = Linear::init(9 * cfg.start_c1, cfg.start_c2, rng, cfg.init_std);
        m.start_mlp1_ = Linear::init(cfg.start_c2, D, rng, cfg.init_std);
        m.start_mlp2_ = Linear::init(D, D, rng, cfg.init_std);
        m.build_im2col_tables();

        m.blocks_.resize(static_cast<std::size_t>(cfg.layers));
        for (auto& b : m.blocks_) {
            b.ln1_g = Tensor::from({D}, std::vector<real>(static_cast<std::size_t>(D), 1), true);
            b.ln1_b = Tensor::zeros({D}, true);
            b.self_q = Linear::init(D, D, rng, cfg.init_std);
            b.self_k = Linear::init(D, D, rng, cfg.init_std);
            b.self_v = Linear::init(D, D, rng, cfg.init_std);
            b.self_o = Linear::init(D, D, rng, cfg.init_std);
            b.ln2_g = Tensor::from({D}, std::vector<real>(static_cast<std::size_t>(D), 1), true);
            b.ln2_b = Tensor::zeros({D}, true);
            b.ln2c_g = Tensor::from({D}, std::vector<real>(static_cast<std::size_t>(D), 1), true);
            b.ln2c_b = Tensor::zeros({D}, true);
            b.cross_q = Linear::init(D, D, rng, cfg.init_std);
            b.cross_k = Linear::init(D, D, rng, cfg.init_std);
            b.cross_v = Linear::init(D, D, rng, cfg.init_std);
            b.cross_o = Linear::init(D, D, rng, cfg.init_std);
            b.ln3_g = Tensor::from({D}, std::vector<real>(static_cast<std::size_t>(D), 1), true);
            b.ln3_b = Tensor::zeros({D}, true);
            b.fc1 = Linear::init(D, 4 * D, rng, cfg.init_std);
            b.fc2 = Linear::init(4 * D, D, rng, cfg.init_std);
        }
        m.lnf_g = Tensor::from({D}, std::vector<real>(static_cast<std::size_t>(D), 1), true);
        m.lnf_b = Tensor::zeros({D}, true);
        m.head_ = Linear::init(D, cfg.vocab, rng, cfg.init_std);
        return m;
    }

    const ModelConfig& config() const { return cfg_; }
    real alpha(int k) const { return cfg_.alpha(k); }

    void set_policy_mode(PolicyMode mode) { mode_ = mode; }
    PolicyMode policy_mode() const { return mode_; }
    bool has_adapters() const { return !blocks_.empty() && blocks_[0].self_q.adapted; }
    long merge_count() const { return merge_count_; }

    // ---------------------------------------------------------------------
    // forward paths

    Tensor start_token(const Image& content, PolicyMode mode) const {
        require(content.h == cfg_.image_size && content.w == cfg_.image_size,
                "start_token: image ", content.h, "x", content.w, " != configured ",
                cfg_.image_size);
        Tensor x = Tensor::from({cfg_.image_size * cfg_.image_size * 3}, content.data);
        int n1 = im2col1_rows_, n2 = im2col2_rows_;
        Tensor p1 = reshape(gather(x, im2col1_), {n1, 9 * 3});
        Tensor h1 = gelu(start_conv1_.apply(p1, mode));
        Tensor p2 = reshape(gather(reshape(h1, {n1 * cfg_.start_c1}), im2col2_),
                            {n2, 9 * cfg_.start_c1});
        Tensor h2 = gelu(start_conv2_.apply(p2, mode));
        Tensor pooled = matmul(pool_row_, h2);  // (1, c2) global mean
        Tensor m1 = gelu(start_mlp1_.apply(pooled, mode));
        return start_mlp2_.apply(m1, mode);  // (1, D)
    }

    // Position + level embedding rows for all tokens of scales < upto.
    Tensor position_embedding(int upto) const {
        std::vector<int> level, row, col;
        for (int k = 0; k < upto; ++k) {
            int s = cfg_.schedule.side(k);
            for (int r = 0; r < s; ++r)
                for (int c = 0; c < s; ++c) {
                    level.push_back(k);
                    row.push_back(r);
                    col.push_back(c);
                }
        }
        return add(add(embedding(level_embed_, level), embedding(row_embed_, row)),
                   embedding(col_embed_, col));
    }

    // Condition tokens go through the shared token embedding plus a single
    // condition-stream type embedding; style and content are distinguished
    // only by which tokens they carry and by the blend weights.
    Tensor condition_embedding(const TokenHierarchy& tokens, int upto) const {
        check_hierarchy("condition", tokens, upto);
        std::vector<int> flat;
        for (int k = 0; k < upto; ++k)
            flat.insert(flat.end(), tokens.maps[static_cast<std::size_t>(k)].begin(),
                        tokens.maps[static_cast<std::size_t>(k)].end());
        Tensor e = embedding(token_embed_, flat);
        e = add(e, cond_stream_embed_);
        return add(e, position_embedding(upto));
    }

    // One layer's blended cross-attention update (pre-residual). Exposed so
    // the blend invariants can be probed directly.
    Tensor cross_attention_update(int layer, const Tensor& h, const Tensor& s_emb,
                                  const Tensor& c_emb, int upto, PolicyMode mode,
                                  const std::vector<real>* alpha_override = nullptr) const {
        const Block& b = blocks_[static_cast<std::size_t>(layer)];
        Tensor hx = layer_norm(h, b.ln2_g, b.ln2_b);
        Tensor kx = b.cross_k.apply(hx, mode);
        Tensor vx = b.cross_v.apply(hx, mode);
        Tensor sx = layer_norm(s_emb, b.ln2c_g, b.ln2c_b);
        Tensor cx = layer_norm(c_emb, b.ln2c_g, b.ln2c_b);
        Tensor qs = b.cross_q.apply(sx, mode);
        Tensor qc = b.cross_q.apply(cx, mode);
        std::vector<Tensor> per_scale;
        for (int k = 0; k < upto; ++k) {
            int off = cfg_.schedule.token_offset(k);
            int n = cfg_.schedule.tokens_at(k);
            Tensor qsk = slice_rows(qs, off, off + n);
            Tensor qck = slice_rows(qc, off, off + n);
            Tensor kk = slice_rows(kx, 0, off + n);
            Tensor vk = slice_rows(vx, 0, off + n);
            Tensor branch_s = head_attention(qsk, kk, vk);
            Tensor branch_c = head_attention(qck, kk, vk);
            real a = alpha_override ? (*alpha_override)[static_cast<std::size_t>(k)] : alpha(k);
            per_scale.push_back(add(scalar_mul(branch_s, a), scalar_mul(branch_c, real(1) - a)));
        }
        return b.cross_o.apply(concat_rows(per_scale), mode);
    }

    // Logits for all token positions of scales < upto. The target stream at
    // scale k is built from inputs.feats[k] (accumulated features of scales
    // < k); scale 0 uses the start token from the content image.
    Tensor forward(const Image& content_image, const ScaleInputs& inputs,
                   const TokenHierarchy& style_tokens, const TokenHierarchy& content_tokens,
                   int upto, PolicyMode mode) const {
        require(upto >= 1 && upto <= cfg_.schedule.num_scales(), "forward: upto ", upto,
                " out of range");
        require(static_cast<int>(inputs.feats.size()) >= upto,
                "forward: inputs cover ", inputs.feats.size(), " scales, need ", upto);

        std::vector<Tensor> rows;
        rows.push_back(start_token(content_image, mode));
        for (int k = 1; k < upto; ++k) {
            int n = cfg_.schedule.tokens_at(k);
            const std::vector<real>& f = inputs.feats[static_cast<std::size_t>(k)];
            require(static_cast<int>(f.size()) == n * cfg_.feature_dim,
                    "forward: scale ", k, " input features have ", f.size(), " values, expected ",
                    n * cfg_.feature_dim);
            Tensor ft = Tensor::from({n, cfg_.feature_dim}, f);
            rows.push_back(feat_in_.apply(ft, mode));
        }
        Tensor h = add(concat_rows(rows), position_embedding(upto));

        Tensor s_emb = condition_embedding(style_tokens, upto);
        Tensor c_emb = condition_embedding(content_tokens, upto);

        for (int layer = 0; layer < cfg_.layers; ++layer) {
            const Block& b = blocks_[static_cast<std::size_t>(layer)];
            h = add(h, self_attention_update(b, h, upto, mode));
            h = add(h, cross_attention_update(layer, h, s_emb, c_emb, upto, mode));
            Tensor f = layer_norm(h, b.ln3_g, b.ln3_b);
            h = add(h, b.fc2.apply(gelu(b.fc1.apply(f, mode)), mode));
        }
        return head_.apply(layer_norm(h, lnf_g, lnf_b), mode);
    }

    Tensor forward_teacher_forced(const Image& content_image, const ScaleInputs& inputs,
                                  const TokenHierarchy& style_tokens,
                                  const TokenHierarchy& content_tokens, PolicyMode mode) const {
        return forward(content_image, inputs, style_tokens, content_tokens,
                       cfg_.schedule.num_scales(), mode);
    }

    // ---------------------------------------------------------------------
    // adapters

    void attach_adapters(int rank) {
        require(rank > 0, "attach_adapters: rank must be positive");
        Rng rng = Rng(cfg_.seed).derive(0xada0);
        for (Linear* l : adapted_linears()) l->attach_adapter(rank, cfg_.adapter_scaling, rng);
    }

    // Peak-triggered merge: bake every adapter delta into the base weights
    // and restart from a zero-initialized adapter. Afterwards the reference
    // path equals the pre-merge current path.
    void lora_merge() {
        require(has_adapters(), "lora_merge: no adapters attached");
        ++merge_count_;
        Rng rng = Rng(cfg_.seed).derive(0xada0 + static_cast<std::uint64_t>(merge_count_));
        for (Linear* l : adapted_linears()) l->merge_adapter(rng);
    }

    // ---------------------------------------------------------------------
    // parameter registration (canonical order; checkpoint relies on names)

    ParamSet base_params() {
        ParamSet ps;
        ps.add("model/token_embed", token_embed_);
        ps.add("model/cond_stream_embed", cond_stream_embed_);
        ps.add("model/level_embed", level_embed_);
        ps.add("model/row_embed", row_embed_);
        ps.add("model/col_embed", col_embed_);
        add_linear(ps, "model/feat_in", feat_in_);
        add_linear(ps, "model/start/conv1", start_conv1_);
        add_linear(ps, "model/start/conv2", start_conv2_);
        add_linear(ps, "model/start/mlp1", start_mlp1_);
        add_linear(ps, "model/start/mlp2", start_mlp2_);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            std::string p = "model/block" + std::to_string(i) + "/";
            Block& b = blocks_[i];
            ps.add(p + "ln1_g", b.ln1_g);
            ps.add(p + "ln1_b", b.ln1_b);
            add_linear(ps, p + "self_q", b.self_q);
            add_linear(ps, p + "self_k", b.self_k);
            add_linear(ps, p + "self_v", b.self_v);
            add_linear(ps, p + "self_o", b.self_o);
            ps.add(p + "ln2_g", b.ln2_g);
            ps.add(p + "ln2_b", b.ln2_b);
            ps.add(p + "ln2c_g", b.ln2c_g);
            ps.add(p + "ln2c_b", b.ln2c_b);
            add_linear(ps, p + "cross_q", b.cross_q);
            add_linear(ps, p + "cross_k", b.cross_k);
            add_linear(ps, p + "cross_v", b.cross_v);
            add_linear(ps, p + "cross_o", b.cross_o);
            ps.add(p + "ln3_g", b.ln3_g);
            ps.add(p + "ln3_b", b.ln3_b);
            add_linear(ps, p + "fc1", b.fc1);
            add_linear(ps, p + "fc2", b.fc2);
        }
        ps.add("model/lnf_g", lnf_g);
        ps.add("model/lnf_b", lnf_b);
        add_linear(ps, "model/head", head_);
        return ps;
    }

    ParamSet adapter_params() {
        require(has_adapters(), "adapter_params: no adapters attached");
        ParamSet ps;
        std::size_t i = 0;
        for (Linear* l : adapted_linears()) {
            ps.add("adapter/" + adapted_names_[i] + "/down", l->lora_down);
            ps.add("adapter/" + adapted_names_[i] + "/up", l->lora_up);
            ++i;
        }
        return ps;
    }

    ParamSet all_params() {
        ParamSet ps = base_params();
        if (has_adapters()) {
            ParamSet ad = adapter_params();
            for (std::size_t i = 0; i < ad.size(); ++i) ps.add(ad.name(i), ad.tensor(i));
        }
        return ps;
    }

private:
    struct Block {
        Tensor ln1_g, ln1_b;
        Linear self_q, self_k, self_v, self_o;
        Tensor ln2_g, ln2_b, ln2c_g, ln2c_b;
        Linear cross_q, cross_k, cross_v, cross_o;
        Tensor ln3_g, ln3_b;
        Linear fc1, fc2;
    };

    Tensor head_attention(const Tensor& q, const Tensor& k, const Tensor& v) const {
        int D = cfg_.embed_dim, H = cfg_.heads, dh = D / H;
        real scale = real(1) / std::sqrt(static_cast<real>(dh));
        std::vector<Tensor> outs;
        outs.reserve(static_cast<std::size_t>(H));
        for (int hh = 0; hh < H; ++hh) {
            Tensor qh = slice_cols(q, hh * dh, (hh + 1) * dh);
            Tensor kh = slice_cols(k, hh * dh, (hh + 1) * dh);
            Tensor vh = slice_cols(v, hh * dh, (hh + 1) * dh);
            Tensor att = softmax(scalar_mul(matmul(qh, transpose(kh)), scale));
            outs.push_back(matmul(att, vh));
        }
        return concat_cols(outs);
    }

    // Block-causal target self-attention: scale k attends to scales <= k.
    Tensor self_attention_update(const Block& b, const Tensor& h, int upto, PolicyMode mode) const {
        Tensor x = layer_norm(h, b.ln1_g, b.ln1_b);
        Tensor q = b.self_q.apply(x, mode);
        Tensor k = b.self_k.apply(x, mode);
        Tensor v = b.self_v.apply(x, mode);
        std::vector<Tensor> per_scale;
        for (int ks = 0; ks < upto; ++ks) {
            int off = cfg_.schedule.token_offset(ks);
            int n = cfg_.schedule.tokens_at(ks);
            Tensor qk = slice_rows(q, off, off + n);
            Tensor kk = slice_rows(k, 0, off + n);
            Tensor vk = slice_rows(v, 0, off + n);
            per_scale.push_back(head_attention(qk, kk, vk));
        }
        return b.self_o.apply(concat_rows(per_scale), mode);
    }

    void check_hierarchy(const char* what, const TokenHierarchy& t, int upto) const {
        require(static_cast<int>(t.maps.size()) >= upto, what, " hierarchy has ", t.maps.size(),
                " scales, need ", upto);
        for (int k = 0; k < upto; ++k)
            require(static_cast<int>(t.maps[static_cast<std::size_t>(k)].size()) ==
                        cfg_.schedule.tokens_at(k),
                    what, " hierarchy scale ", k, " has ", t.maps[static_cast<std::size_t>(k)].size(),
                    " tokens, expected ", cfg_.schedule.tokens_at(k));
    }

    std::vector<Linear*> adapted_linears() {
        std::vector<Linear*> out;
        adapted_names_.clear();
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            std::string p = "block" + std::to_string(i) + "/";
            Block& b = blocks_[i];
            auto push = [&](const char* n, Linear& l) {
                out.push_back(&l);
                adapted_names_.push_back(p + n);
            };
            push("self_q", b.self_q);
            push("self_k", b.self_k);
            push("self_v", b.self_v);
            push("self_o", b.self_o);
            push("cross_q", b.cross_q);
            push("cross_k", b.cross_k);
            push("cross_v", b.cross_v);
            push("cross_o", b.cross_o);
            push("fc1", b.fc1);
            push("fc2", b.fc2);
        }
        return out;
    }

    static void add_linear(ParamSet& ps, const std::string& prefix, Linear& l) {
        ps.add(prefix + "/w", l.weight);
        ps.add(prefix + "/b", l.bias);
    }

    // Gather tables for the two stride-2 convolutions of the start encoder;
    // -1 marks zero padding.
    void build_im2col_tables() {
        auto build = [](int h, int w, int cin, int stride, std::vector<int>& idx) {
            int oh = (h - 1) / stride + 1, ow = (w - 1) / stride + 1;
            idx.clear();
            idx.reserve(static_cast<std::size_t>(oh) * ow * 9 * cin);
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int ky = -1; ky <= 1; ++ky)
                        for (int kx = -1; kx <= 1; ++kx)
                            for (int c = 0; c < cin; ++c) {
                                int iy = oy * stride + ky, ix = ox * stride + kx;
                                idx.push_back(iy >= 0 && iy < h && ix >= 0 && ix < w
                                                  ? (iy * w + ix) * cin + c
                                                  : -1);
                            }
            return oh * ow;
        };
        int s = cfg_.image_size;
        im2col1_rows_ = build(s, s, 3, 2, im2col1_);
        int s2 = (s - 1) / 2 + 1;
        im2col2_rows_ = build(s2, s2, cfg_.start_c1, 2, im2col2_);
        pool_row_ = Tensor::from({1, im2col2_rows_},
                                 std::vector<real>(static_cast<std::size_t>(im2col2_rows_),
                                                   real(1) / static_cast<real>(im2col2_rows_)));
    }

    ModelConfig cfg_;
    PolicyMode mode_ = PolicyMode::Current;
    long merge_count_ = 0;

    Tensor token_embed_, cond_stream_embed_, level_embed_, row_embed_, col_embed_;
    Linear feat_in_;
    Linear start_conv1_, start_conv2_, start_mlp1_, start_mlp2_;
    std::vector<int> im2col1_, im2col2_;
    int im2col1_rows_ = 0, im2col2_rows_ = 0;
    Tensor pool_row_;
    std::vector<Block> blocks_;
    Tensor lnf_g, lnf_b;
    Linear head_;
    std::vector<std::string> adapted_names_;
};

}  // namespace stylevar
