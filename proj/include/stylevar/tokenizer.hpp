#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "stylevar/common.hpp"
#include "stylevar/image.hpp"
#include "stylevar/rng.hpp"
#include "stylevar/schedule.hpp"

namespace stylevar {

// h*w grid of d-dim feature vectors, row-major (h, w, d).
struct FeatureMap {
    int h = 0;
    int w = 0;
    int d = 0;
    std::vector<real> data;

    FeatureMap() = default;
    FeatureMap(int h_, int w_, int d_)
        : h(h_), w(w_), d(d_), data(static_cast<std::size_t>(h_) * w_ * d_, real(0)) {}

    real* cell(int y, int x) { return data.data() + (static_cast<std::size_t>(y) * w + x) * d; }
    const real* cell(int y, int x) const {
        return data.data() + (static_cast<std::size_t>(y) * w + x) * d;
    }
};

// Per-scale integer token maps, values in [0, V).
struct TokenHierarchy {
    std::vector<std::vector<int>> maps;

    int total_tokens() const {
        int n = 0;
        for (const auto& m : maps) n += static_cast<int>(m.size());
        return n;
    }
    std::vector<int> flat() const {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(total_tokens()));
        for (const auto& m : maps) out.insert(out.end(), m.begin(), m.end());
        return out;
    }
};

class Codebook {
public:
    Codebook() = default;
    Codebook(int dim, std::vector<real> entries)
        : dim_(dim), entries_(std::move(entries)) {
        require(dim_ > 0 && entries_.size() % static_cast<std::size_t>(dim_) == 0,
                "codebook: entry buffer not a multiple of dim");
    }

    int size() const { return static_cast<int>(entries_.size() / static_cast<std::size_t>(dim_)); }
    int dim() const { return dim_; }
    const real* entry(int i) const { return entries_.data() + static_cast<std::size_t>(i) * dim_; }
    const std::vector<real>& raw() const { return entries_; }

    // Nearest codeword by squared L2; ties resolve to the lowest index.
    int nearest(const real* v) const {
        require(size() > 0, "codebook: empty");
        int best = 0;
        real best_d = sq_dist(v, entry(0));
        for (int i = 1; i < size(); ++i) {
            real d = sq_dist(v, entry(i));
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    bool has_duplicates() const {
        for (int i = 0; i < size(); ++i)
            for (int j = i + 1; j < size(); ++j)
                if (sq_dist(entry(i), entry(j)) == real(0)) return true;
        return false;
    }

private:
    real sq_dist(const real* a, const real* b) const {
        real s = 0;
        for (int j = 0; j < dim_; ++j) {
            real c = a[j] - b[j];
            s += c * c;
        }
        return s;
    }

    int dim_ = 0;
    std::vector<real> entries_;
};

// Seeded Lloyd k-means with a fixed iteration cap. Initial centroids are V
// distinct samples drawn by seeded shuffle; empty clusters keep their
// previous centroid.
inline Codebook build_codebook(const std::vector<std::vector<real>>& samples, int V,
                               std::uint64_t seed, int iters = 25) {
    require(V >= 1, "build_codebook: V must be >= 1");
    require(!samples.empty(), "build_codebook: no samples");
    int d = static_cast<int>(samples[0].size());

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    std::vector<real> centroids;
    centroids.reserve(static_cast<std::size_t>(V) * d);
    for (std::size_t i = 0; i < order.size() && static_cast<int>(centroids.size()) < V * d; ++i) {
        const auto& s = samples[order[i]];
        require(static_cast<int>(s.size()) == d, "build_codebook: inconsistent sample dims");
        bool dup = false;
        for (std::size_t c = 0; c * d < centroids.size(); ++c) {
            real dist = 0;
            for (int j = 0; j < d; ++j) {
                real v = centroids[c * d + j] - s[static_cast<std::size_t>(j)];
                dist += v * v;
            }
            if (dist == real(0)) {
                dup = true;
                break;
            }
        }
        if (!dup) centroids.insert(centroids.end(), s.begin(), s.end());
    }
    require(static_cast<int>(centroids.size()) == V * d,
            "build_codebook: fewer distinct samples than V=", V);

    std::vector<int> assign(samples.size());
    for (int it = 0; it < iters; ++it) {
        Codebook current(d, centroids);
        for (std::size_t i = 0; i < samples.size(); ++i)
            assign[i] = current.nearest(samples[i].data());
        std::vector<real> sums(static_cast<std::size_t>(V) * d, real(0));
        std::vector<int> counts(static_cast<std::size_t>(V), 0);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            int a = assign[i];
            ++counts[static_cast<std::size_t>(a)];
            for (int j = 0; j < d; ++j)
                sums[static_cast<std::size_t>(a) * d + j] += samples[i][static_cast<std::size_t>(j)];
        }
        for (int c = 0; c < V; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            for (int j = 0; j < d; ++j)
                centroids[static_cast<std::size_t>(c) * d + j] =
                    sums[static_cast<std::size_t>(c) * d + j] / counts[static_cast<std::size_t>(c)];
        }
    }
    Codebook out(d, std::move(centroids));
    require(!out.has_duplicates(), "build_codebook: duplicate codewords after construction");
    return out;
}

namespace detail {

// Solves (A + ridge*I) x = b for SPD A via Cholesky; A is n x n row-major.
inline std::vector<real> solve_spd(std::vector<real> a, std::vector<real> b, int n,
                                   real ridge = real(1e-8)) {
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] += ridge;
    // in-place LL^T
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            real s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            if (i == j) {
                require(s > 0, "solve_spd: matrix not positive definite");
                a[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
            } else {
                a[static_cast<std::size_t>(i) * n + j] = s / a[static_cast<std::size_t>(j) * n + j];
            }
        }
    }
    // forward then back substitution
    for (int i = 0; i < n; ++i) {
        real s = b[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= a[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        real s = b[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k)
            s -= a[static_cast<std::size_t>(k) * n + i] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i) * n + i];
    }
    return b;
}

}  // namespace detail

struct TokenizerConfig {
    int d = 16;
    int V = 64;
    int image_size = 32;
    ScaleSchedule schedule = ScaleSchedule::full();
    std::uint64_t seed = 1;
    int kmeans_iters = 25;
    int codebook_images = 48;
};

// Frozen multi-scale residual quantizer. The encoder is a fixed seeded linear
// patch projection; the decoder is a linear readout fit once by least squares
// on seeded synthetic patches. Codeword 0 is always the zero vector.
class MsTokenizer {
public:
    static MsTokenizer build(const TokenizerConfig& cfg) {
        MsTokenizer t;
        t.cfg_ = cfg;
        int side = cfg.schedule.final_side();
        require(cfg.image_size % side == 0, "tokenizer: image size ", cfg.image_size,
                " not divisible by final side ", side);
        t.patch_ = cfg.image_size / side;
        int plen = t.patch_len();

        Rng rng = Rng(cfg.seed).derive(0x70a3);
        t.enc_weight_.resize(static_cast<std::size_t>(cfg.d) * plen);
        real scale = real(1) / std::sqrt(static_cast<real>(plen));
        for (real& w : t.enc_weight_) w = static_cast<real>(rng.next_normal()) * scale;

        t.fit_decoder();
        t.build_codebook_from_residuals();
        return t;
    }

    const TokenizerConfig& config() const { return cfg_; }
    const ScaleSchedule& schedule() const { return cfg_.schedule; }
    const Codebook& codebook() const { return codebook_; }
    int patch() const { return patch_; }
    int patch_len() const { return patch_ * patch_ * 3; }

    FeatureMap encode_features(const Image& img) const {
        int side = cfg_.schedule.final_side();
        require(img.h == cfg_.image_size && img.w == cfg_.image_size, "encode_features: image ",
                img.h, "x", img.w, " does not match configured size ", cfg_.image_size);
        FeatureMap f(side, side, cfg_.d);
        std::vector<real> p(static_cast<std::size_t>(patch_len()));
        for (int by = 0; by < side; ++by) {
            for (int bx = 0; bx < side; ++bx) {
                extract_patch(img, by, bx, p.data());
                real* out = f.cell(by, bx);
                for (int r = 0; r < cfg_.d; ++r) {
                    real acc = 0;
                    const real* wrow = enc_weight_.data() + static_cast<std::size_t>(r) * p.size();
                    for (std::size_t j = 0; j < p.size(); ++j) acc += wrow[j] * p[j];
                    out[r] = acc;
                }
            }
        }
        return f;
    }

    // Residual quantization mirror of the decode loop: at each scale the
    // residual f - f_hat is downsampled, snapped to the nearest codeword,
    // and the looked-up vectors are accumulated back at full resolution.
    TokenHierarchy ms_quantize(const FeatureMap& f, FeatureMap* fhat_out = nullptr) const {
        require(codebook_.size() > 0, "ms_quantize: empty codebook");
        require(f.h == cfg_.schedule.final_side() && f.w == f.h && f.d == cfg_.d,
                "ms_quantize: feature map does not match schedule");
        TokenHierarchy tokens;
        tokens.maps.resize(static_cast<std::size_t>(cfg_.schedule.num_scales()));
        FeatureMap acc(f.h, f.w, f.d);
        for (int k = 0; k < cfg_.schedule.num_scales(); ++k) {
            int s = cfg_.schedule.side(k);
            std::vector<real> residual(f.data.size());
            for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = f.data[i] - acc.data[i];
            std::vector<real> down = resample(residual, f.h, f.w, f.d, s, s);
            std::vector<int>& map = tokens.maps[static_cast<std::size_t>(k)];
            map.resize(static_cast<std::size_t>(s) * s);
            for (int i = 0; i < s * s; ++i)
                map[static_cast<std::size_t>(i)] =
                    codebook_.nearest(down.data() + static_cast<std::size_t>(i) * f.d);
            add_scale(acc, map, k);
        }
        if (fhat_out) *fhat_out = acc;
        return tokens;
    }

    // Continuous variant of ms_quantize with the codeword snap disabled;
    // the final-scale residual closes the reconstruction exactly.
    FeatureMap identity_reconstruct(const FeatureMap& f) const {
        FeatureMap acc(f.h, f.w, f.d);
        for (int k = 0; k < cfg_.schedule.num_scales(); ++k) {
            int s = cfg_.schedule.side(k);
            std::vector<real> residual(f.data.size());
            for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = f.data[i] - acc.data[i];
            std::vector<real> down = resample(residual, f.h, f.w, f.d, s, s);
            std::vector<real> up = resample(down, s, s, f.d, f.h, f.w);
            for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += up[i];
        }
        return acc;
    }

    FeatureMap accumulate_features(const TokenHierarchy& tokens) const {
        require(static_cast<int>(tokens.maps.size()) == cfg_.schedule.num_scales(),
                "accumulate: hierarchy has ", tokens.maps.size(), " scales, schedule has ",
                cfg_.schedule.num_scales());
        int side = cfg_.schedule.final_side();
        FeatureMap acc(side, side, cfg_.d);
        for (int k = 0; k < cfg_.schedule.num_scales(); ++k) {
            require(static_cast<int>(tokens.maps[static_cast<std::size_t>(k)].size()) ==
                        cfg_.schedule.tokens_at(k),
                    "accumulate: scale ", k, " token count mismatch");
            add_scale(acc, tokens.maps[static_cast<std::size_t>(k)], k);
        }
        return acc;
    }

    std::pair<FeatureMap, Image> accumulate_decode(const TokenHierarchy& tokens) const {
        FeatureMap acc = accumulate_features(tokens);
        return {acc, decode_image(acc)};
    }

    Image decode_image(const FeatureMap& f) const {
        int side = cfg_.schedule.final_side();
        Image img(cfg_.image_size, cfg_.image_size);
        int plen = patch_len();
        std::vector<real> p(static_cast<std::size_t>(plen));
        for (int by = 0; by < side; ++by) {
            for (int bx = 0; bx < side; ++bx) {
                const real* cell = f.cell(by, bx);
                for (int j = 0; j < plen; ++j) {
                    const real* drow = dec_weight_.data() + static_cast<std::size_t>(j) * (cfg_.d + 1);
                    real acc = drow[cfg_.d];  // bias column
                    for (int r = 0; r < cfg_.d; ++r) acc += drow[r] * cell[r];
                    p[static_cast<std::size_t>(j)] = acc;
                }
                write_patch(img, by, bx, p.data());
            }
        }
        img.clamp01();
        return img;
    }

    // Incremental decode helper shared with the sampler: one scale's tokens
    // looked up and accumulated into f_hat at full resolution.
    void add_scale(FeatureMap& acc, const std::vector<int>& map, int k) const {
        int s = cfg_.schedule.side(k);
        require(static_cast<int>(map.size()) == s * s, "add_scale: token count mismatch at scale ", k);
        std::vector<real> z(static_cast<std::size_t>(s) * s * cfg_.d);
        for (int i = 0; i < s * s; ++i) {
            int idx = map[static_cast<std::size_t>(i)];
            require(idx >= 0 && idx < codebook_.size(), "add_scale: token ", idx,
                    " out of codebook range [0,", codebook_.size(), ")");
            std::copy_n(codebook_.entry(idx), cfg_.d, z.data() + static_cast<std::size_t>(i) * cfg_.d);
        }
        std::vector<real> up = resample(z, s, s, cfg_.d, acc.h, acc.w);
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += up[i];
    }

    std::uint64_t checksum() const {
        std::uint64_t h = fnv1a(enc_weight_);
        h = fnv1a(dec_weight_, h);
        h = fnv1a(codebook_.raw(), h);
        return h;
    }

    // serialization surface
    const std::vector<real>& encoder_weights() const { return enc_weight_; }
    const std::vector<real>& decoder_weights() const { return dec_weight_; }
    static MsTokenizer restore(const TokenizerConfig& cfg, std::vector<real> enc,
                               std::vector<real> dec, Codebook cb) {
        MsTokenizer t;
        t.cfg_ = cfg;
        t.patch_ = cfg.image_size / cfg.schedule.final_side();
        t.enc_weight_ = std::move(enc);
        t.dec_weight_ = std::move(dec);
        t.codebook_ = std::move(cb);
        return t;
    }

private:
    void extract_patch(const Image& img, int by, int bx, real* out) const {
        int i = 0;
        for (int y = 0; y < patch_; ++y)
            for (int x = 0; x < patch_; ++x)
                for (int c = 0; c < 3; ++c) out[i++] = img.at(by * patch_ + y, bx * patch_ + x, c);
    }
    void write_patch(Image& img, int by, int bx, const real* p) const {
        int i = 0;
        for (int y = 0; y < patch_; ++y)
            for (int x = 0; x < patch_; ++x)
                for (int c = 0; c < 3; ++c) img.at(by * patch_ + y, bx * patch_ + x, c) = p[i++];
    }

    // Least-squares readout: minimize sum ||p_i - D [f_i;1]||^2 over seeded
    // random patches, solved per output coordinate via normal equations.
    void fit_decoder() {
        int plen = patch_len();
        int n = cfg_.d + 1;
        Rng rng = Rng(cfg_.seed).derive(0xdec0);
        const int samples = 512;
        std::vector<real> feats(static_cast<std::size_t>(samples) * n);
        std::vector<real> patches(static_cast<std::size_t>(samples) * plen);
        std::vector<real> p(static_cast<std::size_t>(plen));
        for (int i = 0; i < samples; ++i) {
            for (int j = 0; j < plen; ++j) p[static_cast<std::size_t>(j)] = rng.next_double();
            real* f = feats.data() + static_cast<std::size_t>(i) * n;
            for (int r = 0; r < cfg_.d; ++r) {
                real acc = 0;
                const real* wrow = enc_weight_.data() + static_cast<std::size_t>(r) * plen;
                for (int j = 0; j < plen; ++j) acc += wrow[j] * p[static_cast<std::size_t>(j)];
                f[r] = acc;
            }
            f[cfg_.d] = 1;
            std::copy_n(p.data(), plen, patches.data() + static_cast<std::size_t>(i) * plen);
        }
        std::vector<real> gram(static_cast<std::size_t>(n) * n, real(0));
        for (int i = 0; i < samples; ++i) {
            const real* f = feats.data() + static_cast<std::size_t>(i) * n;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) gram[static_cast<std::size_t>(a) * n + b] += f[a] * f[b];
        }
        dec_weight_.assign(static_cast<std::size_t>(plen) * n, real(0));
        for (int j = 0; j < plen; ++j) {
            std::vector<real> rhs(static_cast<std::size_t>(n), real(0));
            for (int i = 0; i < samples; ++i) {
                const real* f = feats.data() + static_cast<std::size_t>(i) * n;
                real t = patches[static_cast<std::size_t>(i) * plen + j];
                for (int a = 0; a < n; ++a) rhs[static_cast<std::size_t>(a)] += f[a] * t;
            }
            std::vector<real> sol = detail::solve_spd(gram, rhs, n);
            std::copy_n(sol.data(), n, dec_weight_.data() + static_cast<std::size_t>(j) * n);
        }
    }

    // Pools scale-wise residuals from seeded noise images (identity pipeline)
    // and k-means them into V-1 codewords behind the fixed zero codeword.
    void build_codebook_from_residuals() {
        Rng rng = Rng(cfg_.seed).derive(0xcb00);
        std::vector<std::vector<real>> pool;
        for (int img_i = 0; img_i < cfg_.codebook_images; ++img_i) {
            Image img(cfg_.image_size, cfg_.image_size);
            // smooth noise: random low-res field upsampled
            int base = std::max(2, cfg_.image_size / 8);
            std::vector<real> lowres(static_cast<std::size_t>(base) * base * 3);
            for (real& v : lowres) v = rng.next_double();
            img.data = resample_bilinear(lowres, base, base, 3, cfg_.image_size, cfg_.image_size);
            FeatureMap f = encode_features(img);
            FeatureMap acc(f.h, f.w, f.d);
            for (int k = 0; k < cfg_.schedule.num_scales(); ++k) {
                int s = cfg_.schedule.side(k);
                std::vector<real> residual(f.data.size());
                for (std::size_t i = 0; i < residual.size(); ++i)
                    residual[i] = f.data[i] - acc.data[i];
                std::vector<real> down = resample(residual, f.h, f.w, f.d, s, s);
                for (int i = 0; i < s * s; ++i)
                    pool.emplace_back(down.begin() + static_cast<std::size_t>(i) * cfg_.d,
                                      down.begin() + static_cast<std::size_t>(i + 1) * cfg_.d);
                std::vector<real> up = resample(down, s, s, cfg_.d, f.h, f.w);
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += up[i];
            }
        }
        Codebook kmeans = build_codebook(pool, cfg_.V - 1, cfg_.seed ^ 0xbeef, cfg_.kmeans_iters);
        std::vector<real> entries(static_cast<std::size_t>(cfg_.d), real(0));  // index 0 = zero vector
        entries.insert(entries.end(), kmeans.raw().begin(), kmeans.raw().end());
        codebook_ = Codebook(cfg_.d, std::move(entries));
        require(!codebook_.has_duplicates(), "tokenizer codebook: duplicate codewords");
    }

    TokenizerConfig cfg_;
    int patch_ = 1;
    std::vector<real> enc_weight_;  // d x patch_len
    std::vector<real> dec_weight_;  // patch_len x (d+1), bias last
    Codebook codebook_;
};

}  // namespace stylevar
