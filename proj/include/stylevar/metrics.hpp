#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stylevar/common.hpp"
#include "stylevar/data.hpp"
#include "stylevar/image.hpp"
#include "stylevar/rng.hpp"

namespace stylevar {

// Frozen seeded conv stack used as the perceptual backbone for both the
// reward and the evaluation metrics. Three 3x3 layers (stride 1, 2, 2) with
// tanh, tapped after every layer. Never trained.
class ProxyFeatureNet {
public:
    struct Tap {
        int h = 0, w = 0, c = 0;
        std::vector<real> data;  // (h, w, c)
    };

    explicit ProxyFeatureNet(std::uint64_t seed = 7) : seed_(seed) {
        Rng rng = Rng(seed).derive(0xfea7);
        init_layer(conv1_, 3, 8, rng);
        init_layer(conv2_, 8, 16, rng);
        init_layer(conv3_, 16, 16, rng);
    }

    std::uint64_t seed() const { return seed_; }

    std::vector<Tap> features(const Image& img) const {
        std::vector<Tap> taps;
        Tap x{img.h, img.w, 3, img.data};
        x = apply(conv1_, x, 1);
        taps.push_back(x);
        x = apply(conv2_, x, 2);
        taps.push_back(x);
        x = apply(conv3_, x, 2);
        taps.push_back(x);
        return taps;
    }

    // Concatenated tap activations with per-channel instance normalization
    // (keeps spatial structure, discards absolute channel levels), then
    // L2-normalized as a whole.
    std::vector<real> embedding(const Image& img) const {
        std::vector<real> e;
        for (const Tap& t : features(img)) {
            std::size_t base = e.size();
            e.insert(e.end(), t.data.begin(), t.data.end());
            std::int64_t hw = static_cast<std::int64_t>(t.h) * t.w;
            for (int c = 0; c < t.c; ++c) {
                real mean = 0;
                for (std::int64_t i = 0; i < hw; ++i)
                    mean += e[base + static_cast<std::size_t>(i) * t.c + c];
                mean /= static_cast<real>(hw);
                real var = 0;
                for (std::int64_t i = 0; i < hw; ++i) {
                    real d = e[base + static_cast<std::size_t>(i) * t.c + c] - mean;
                    var += d * d;
                }
                var /= static_cast<real>(hw);
                real inv = real(1) / (std::sqrt(var) + real(1e-8));
                for (std::int64_t i = 0; i < hw; ++i) {
                    real& v = e[base + static_cast<std::size_t>(i) * t.c + c];
                    v = (v - mean) * inv;
                }
            }
        }
        real norm = 0;
        for (real v : e) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0)
            for (real& v : e) v /= norm;
        return e;
    }

private:
    struct Conv {
        int cin = 0, cout = 0;
        std::vector<real> w;  // (cout, 3*3*cin)
        std::vector<real> b;  // (cout)
    };

    static void init_layer(Conv& c, int cin, int cout, Rng& rng) {
        c.cin = cin;
        c.cout = cout;
        int fan = 9 * cin;
        c.w.resize(static_cast<std::size_t>(cout) * fan);
        real scale = real(1) / std::sqrt(static_cast<real>(fan));
        for (real& v : c.w) v = static_cast<real>(rng.next_normal()) * scale;
        c.b.resize(static_cast<std::size_t>(cout));
        for (real& v : c.b) v = static_cast<real>(rng.next_normal()) * real(0.1);
    }

    static Tap apply(const Conv& conv, const Tap& in, int stride) {
        Tap out;  // k=3, pad=1: out = floor((in-1)/stride) + 1
        out.h = (in.h - 1) / stride + 1;
        out.w = (in.w - 1) / stride + 1;
        out.c = conv.cout;
        out.data.assign(static_cast<std::size_t>(out.h) * out.w * out.c, real(0));
        for (int oy = 0; oy < out.h; ++oy) {
            for (int ox = 0; ox < out.w; ++ox) {
                for (int oc = 0; oc < conv.cout; ++oc) {
                    const real* wrow = conv.w.data() + static_cast<std::size_t>(oc) * 9 * conv.cin;
                    real acc = conv.b[static_cast<std::size_t>(oc)];
                    int wi = 0;
                    for (int ky = -1; ky <= 1; ++ky) {
                        for (int kx = -1; kx <= 1; ++kx) {
                            int iy = oy * stride + ky, ix = ox * stride + kx;
                            if (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w) {
                                const real* px =
                                    in.data.data() + (static_cast<std::size_t>(iy) * in.w + ix) * in.c;
                                for (int ic = 0; ic < in.c; ++ic) acc += wrow[wi + ic] * px[ic];
                            }
                            wi += in.c;
                        }
                    }
                    out.data[(static_cast<std::size_t>(oy) * out.w + ox) * out.c + oc] =
                        std::tanh(acc);
                }
            }
        }
        return out;
    }

    std::uint64_t seed_;
    Conv conv1_, conv2_, conv3_;
};

// Mean squared distance between normalized embeddings; the desk-scale
// stand-in for a learned perceptual metric.
inline real proxy_perceptual_distance(const ProxyFeatureNet& net, const Image& a, const Image& b) {
    require(a.h == b.h && a.w == b.w, "proxy_perceptual_distance: dim mismatch ", a.h, "x", a.w,
            " vs ", b.h, "x", b.w);
    std::vector<real> ea = net.embedding(a);
    std::vector<real> eb = net.embedding(b);
    real s = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        real d = ea[i] - eb[i];
        s += d * d;
    }
    return s / static_cast<real>(ea.size());
}

// R(x_hat, x) = -lambda * distance; zero at a perfect match, negative otherwise.
inline real reward(const ProxyFeatureNet& net, const Image& generated, const Image& target,
                   real lambda) {
    require(lambda > 0, "reward: lambda must be positive, got ", lambda);
    return -lambda * proxy_perceptual_distance(net, generated, target);
}

// Pixel-space channel statistics matching.
inline Image adain_baseline(const Image& content, const Image& style) {
    Image out = content;
    for (int c = 0; c < 3; ++c) {
        real mc = 0, ms = 0;
        std::int64_t nc = static_cast<std::int64_t>(content.h) * content.w;
        std::int64_t ns = static_cast<std::int64_t>(style.h) * style.w;
        for (int i = 0; i < nc; ++i) mc += content.data[static_cast<std::size_t>(i) * 3 + c];
        for (int i = 0; i < ns; ++i) ms += style.data[static_cast<std::size_t>(i) * 3 + c];
        mc /= nc;
        ms /= ns;
        real vc = 0, vs = 0;
        for (int i = 0; i < nc; ++i) {
            real d = content.data[static_cast<std::size_t>(i) * 3 + c] - mc;
            vc += d * d;
        }
        for (int i = 0; i < ns; ++i) {
            real d = style.data[static_cast<std::size_t>(i) * 3 + c] - ms;
            vs += d * d;
        }
        real sc = std::sqrt(vc / nc), ss = std::sqrt(vs / ns);
        for (int i = 0; i < nc; ++i) {
            real v = content.data[static_cast<std::size_t>(i) * 3 + c];
            out.data[static_cast<std::size_t>(i) * 3 + c] = ss * (v - mc) / (sc + real(1e-8)) + ms;
        }
    }
    out.clamp01();
    return out;
}

// Single-scale SSIM, 8x8 uniform sliding windows, C1=(0.01L)^2 C2=(0.03L)^2
// with L=1, averaged over channels and window positions.
inline real ssim(const Image& a, const Image& b) {
    require(a.h == b.h && a.w == b.w, "ssim: dim mismatch");
    constexpr real C1 = real(0.01 * 0.01);
    constexpr real C2 = real(0.03 * 0.03);
    int win = std::min({8, a.h, a.w});
    real total = 0;
    std::int64_t count = 0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y + win <= a.h; ++y) {
            for (int x = 0; x + win <= a.w; ++x) {
                real sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int dy = 0; dy < win; ++dy) {
                    for (int dx = 0; dx < win; ++dx) {
                        real va = a.at(y + dy, x + dx, c);
                        real vb = b.at(y + dy, x + dx, c);
                        sx += va;
                        sy += vb;
                        sxx += va * va;
                        syy += vb * vb;
                        sxy += va * vb;
                    }
                }
                real n = static_cast<real>(win) * win;
                real mx = sx / n, my = sy / n;
                real vx = sxx / n - mx * mx;
                real vy = syy / n - my * my;
                real cov = sxy / n - mx * my;
                real num = (2 * mx * my + C1) * (2 * cov + C2);
                real den = (mx * mx + my * my + C1) * (vx + vy + C2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<real>(count);
}

namespace detail {
inline std::vector<real> gram_matrix(const ProxyFeatureNet::Tap& t) {
    std::vector<real> g(static_cast<std::size_t>(t.c) * t.c, real(0));
    std::int64_t hw = static_cast<std::int64_t>(t.h) * t.w;
    for (std::int64_t i = 0; i < hw; ++i) {
        const real* f = t.data.data() + static_cast<std::size_t>(i) * t.c;
        for (int p = 0; p < t.c; ++p)
            for (int q = 0; q < t.c; ++q) g[static_cast<std::size_t>(p) * t.c + q] += f[p] * f[q];
    }
    for (real& v : g) v /= static_cast<real>(hw);
    return g;
}
}  // namespace detail

// Mean squared Gram-matrix difference over taps; spatial arrangement is
// discarded by construction.
inline real gram_style_loss(const ProxyFeatureNet& net, const Image& generated,
                            const Image& style) {
    auto ta = net.features(generated);
    auto tb = net.features(style);
    real total = 0;
    for (std::size_t l = 0; l < ta.size(); ++l) {
        auto ga = detail::gram_matrix(ta[l]);
        auto gb = detail::gram_matrix(tb[l]);
        real s = 0;
        for (std::size_t i = 0; i < ga.size(); ++i) {
            real d = ga[i] - gb[i];
            s += d * d;
        }
        total += s / static_cast<real>(ga.size());
    }
    return total / static_cast<real>(ta.size());
}

// Mean squared feature difference over taps.
inline real feature_content_loss(const ProxyFeatureNet& net, const Image& generated,
                                 const Image& content) {
    require(generated.h == content.h && generated.w == content.w, "content loss: dim mismatch");
    auto ta = net.features(generated);
    auto tb = net.features(content);
    real total = 0;
    for (std::size_t l = 0; l < ta.size(); ++l) {
        real s = 0;
        for (std::size_t i = 0; i < ta[l].data.size(); ++i) {
            real d = ta[l].data[i] - tb[l].data[i];
            s += d * d;
        }
        total += s / static_cast<real>(ta[l].data.size());
    }
    return total / static_cast<real>(ta.size());
}

struct MetricRow {
    int id = 0;
    real style_loss = 0;
    real content_loss = 0;
    real ssim_vs_target = 0;
    real proxy_perceptual = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    real mean_style_loss = 0;
    real mean_content_loss = 0;
    real mean_ssim = 0;
    real mean_proxy_perceptual = 0;

    void finalize() {
        require(!rows.empty(), "metric report: empty split");
        mean_style_loss = mean_content_loss = mean_ssim = mean_proxy_perceptual = 0;
        for (const MetricRow& r : rows) {
            mean_style_loss += r.style_loss;
            mean_content_loss += r.content_loss;
            mean_ssim += r.ssim_vs_target;
            mean_proxy_perceptual += r.proxy_perceptual;
        }
        real n = static_cast<real>(rows.size());
        mean_style_loss /= n;
        mean_content_loss /= n;
        mean_ssim /= n;
        mean_proxy_perceptual /= n;
    }
};

// Runs a generator (model sampler, AdaIN, identity, ...) over a dataset split
// and scores every output against the triplet's style/content/target.
inline MetricReport evaluate(const std::function<Image(const Triplet&)>& generator,
                             const std::vector<const Triplet*>& split,
                             const ProxyFeatureNet& net) {
    require(!split.empty(), "evaluate: empty split");
    MetricReport report;
    for (const Triplet* t : split) {
        Image gen = generator(*t);
        MetricRow row;
        row.id = t->id;
        row.style_loss = gram_style_loss(net, gen, t->style);
        row.content_loss = feature_content_loss(net, gen, t->content);
        row.ssim_vs_target = ssim(gen, t->target);
        row.proxy_perceptual = proxy_perceptual_distance(net, gen, t->target);
        report.rows.push_back(row);
    }
    report.finalize();
    return report;
}

inline void write_metrics_csv(const MetricReport& report, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "write_metrics_csv: cannot open ", path);
    f << "id,style_loss,content_loss,ssim,proxy_perceptual\n";
    char line[256];
    for (const MetricRow& r : report.rows) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g\n", r.id, r.style_loss,
                      r.content_loss, r.ssim_vs_target, r.proxy_perceptual);
        f << line;
    }
    require(f.good(), "write_metrics_csv: short write to ", path);
}

inline void write_metrics_json(const MetricReport& report, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "write_metrics_json: cannot open ", path);
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "{\n  \"samples\": %zu,\n  \"mean_style_loss\": %.17g,\n"
                  "  \"mean_content_loss\": %.17g,\n  \"mean_ssim\": %.17g,\n"
                  "  \"mean_proxy_perceptual\": %.17g\n}\n",
                  report.rows.size(), report.mean_style_loss, report.mean_content_loss,
                  report.mean_ssim, report.mean_proxy_perceptual);
    f << buf;
    require(f.good(), "write_metrics_json: short write to ", path);
}

}  // namespace stylevar
