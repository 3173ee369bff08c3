#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylevar/common.hpp"
#include "stylevar/image.hpp"
#include "stylevar/rng.hpp"

namespace stylevar {

struct Triplet {
    int id = 0;
    std::uint64_t seed = 0;
    std::string split;  // "train" or "val"
    Image content;
    Image style;
    Image target;
};

namespace detail {

inline real luminance(const real* px) {
    return real(0.299) * px[0] + real(0.587) * px[1] + real(0.114) * px[2];
}

inline Image draw_content(Rng& rng, int size) {
    Image img(size, size);
    std::array<real, 3> bg{static_cast<real>(rng.next_double()), static_cast<real>(rng.next_double()),
                           static_cast<real>(rng.next_double())};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = bg[static_cast<std::size_t>(c)];

    int shapes = 2 + static_cast<int>(rng.next_below(3));  // 2..4
    for (int s = 0; s < shapes; ++s) {
        std::array<real, 3> col{static_cast<real>(rng.next_double()), static_cast<real>(rng.next_double()),
                                static_cast<real>(rng.next_double())};
        int kind = static_cast<int>(rng.next_below(3));
        real cx = rng.uniform(0.15, 0.85) * size;
        real cy = rng.uniform(0.15, 0.85) * size;
        real r = rng.uniform(0.10, 0.30) * size;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                bool inside = false;
                real dx = x - cx, dy = y - cy;
                if (kind == 0) {  // circle
                    inside = dx * dx + dy * dy <= r * r;
                } else if (kind == 1) {  // axis-aligned square
                    inside = std::fabs(dx) <= r && std::fabs(dy) <= r;
                } else {  // upward triangle
                    inside = dy <= r && dy >= -r && std::fabs(dx) <= (dy + r) * real(0.5);
                }
                if (inside)
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[static_cast<std::size_t>(c)];
            }
        }
    }
    return img;
}

inline std::vector<std::array<real, 3>> draw_palette(Rng& rng) {
    int n = 3 + static_cast<int>(rng.next_below(3));  // 3..5 colors
    std::vector<std::array<real, 3>> palette;
    for (int i = 0; i < n; ++i)
        palette.push_back({static_cast<real>(rng.next_double()), static_cast<real>(rng.next_double()),
                           static_cast<real>(rng.next_double())});
    // dark-to-light ordering so luminance bands map monotonically
    std::sort(palette.begin(), palette.end(),
              [](const std::array<real, 3>& a, const std::array<real, 3>& b) {
                  return luminance(a.data()) < luminance(b.data());
              });
    return palette;
}

inline Image draw_style(Rng& rng, int size, const std::vector<std::array<real, 3>>& palette) {
    Image img(size, size);
    int kind = static_cast<int>(rng.next_below(3));
    int p = static_cast<int>(palette.size());
    if (kind == 0) {  // stripes
        int period = 2 + static_cast<int>(rng.next_below(5));
        bool vertical = rng.next_below(2) == 0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                int band = ((vertical ? x : y) / period) % p;
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = palette[static_cast<std::size_t>(band)][static_cast<std::size_t>(c)];
            }
    } else if (kind == 1) {  // checker
        int cell = 2 + static_cast<int>(rng.next_below(4));
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                int band = (y / cell + x / cell) % p;
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = palette[static_cast<std::size_t>(band)][static_cast<std::size_t>(c)];
            }
    } else {  // smooth noise quantized to the palette
        int base = std::max(2, size / 4);
        std::vector<real> low(static_cast<std::size_t>(base) * base);
        for (real& v : low) v = rng.next_double();
        std::vector<real> field = resample_bilinear(low, base, base, 1, size, size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                real v = field[static_cast<std::size_t>(y) * size + x];
                int band = std::min(p - 1, static_cast<int>(v * p));
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = palette[static_cast<std::size_t>(band)][static_cast<std::size_t>(c)];
            }
    }
    return img;
}

// Luminance-band palette remap of the content, blended 0.7/0.3 with the
// style texture. Exact ground truth for the SFT cross-entropy.
inline Image stylize_target(const Image& content, const Image& style,
                            const std::vector<std::array<real, 3>>& palette) {
    int p = static_cast<int>(palette.size());
    Image out(content.h, content.w);
    for (int y = 0; y < content.h; ++y) {
        for (int x = 0; x < content.w; ++x) {
            const real* px = &content.data[(static_cast<std::size_t>(y) * content.w + x) * 3];
            real lum = luminance(px);
            int band = std::min(p - 1, static_cast<int>(lum * p));
            for (int c = 0; c < 3; ++c) {
                real remap = palette[static_cast<std::size_t>(band)][static_cast<std::size_t>(c)];
                out.at(y, x, c) = real(0.7) * remap + real(0.3) * style.at(y, x, c);
            }
        }
    }
    out.clamp01();
    return out;
}

}  // namespace detail

// Pure function of (dataset seed, id): regenerable without the manifest.
inline Triplet make_triplet(std::uint64_t dataset_seed, int id, int image_size) {
    Triplet t;
    t.id = id;
    t.seed = Rng::mix64(dataset_seed ^ Rng::mix64(static_cast<std::uint64_t>(id) + 1));
    Rng rng(t.seed);
    Rng content_rng = rng.derive(1);
    Rng style_rng = rng.derive(2);
    t.content = detail::draw_content(content_rng, image_size);
    auto palette = detail::draw_palette(style_rng);
    t.style = detail::draw_style(style_rng, image_size, palette);
    t.target = detail::stylize_target(t.content, t.style, palette);
    return t;
}

// n triplets with a seeded 95/5 train/val split, written as PPM files plus a
// manifest.json that records ids, per-item seeds and the split assignment.
inline void gen_triplets(int n, std::uint64_t seed, int image_size, const std::string& dir) {
    require(n >= 1, "gen_triplets: n must be >= 1, got ", n);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "gen_triplets: cannot create directory ", dir, ": ", ec.message());

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng split_rng = Rng(seed).derive(0x5911);
    split_rng.shuffle(order.begin(), order.end());
    int train_count = n * 95 / 100;
    std::vector<std::string> split(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        split[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
            i < train_count ? "train" : "val";

    nlohmann::json manifest;
    manifest["n"] = n;
    manifest["seed"] = seed;
    manifest["image_size"] = image_size;
    manifest["items"] = nlohmann::json::array();
    char name[64];
    for (int i = 0; i < n; ++i) {
        Triplet t = make_triplet(seed, i, image_size);
        t.split = split[static_cast<std::size_t>(i)];
        std::snprintf(name, sizeof(name), "triplet_%06d", i);
        std::string base = std::string(name);
        write_ppm(dir + "/" + base + "_content.ppm", t.content);
        write_ppm(dir + "/" + base + "_style.ppm", t.style);
        write_ppm(dir + "/" + base + "_target.ppm", t.target);
        nlohmann::json item;
        item["id"] = i;
        item["seed"] = t.seed;
        item["split"] = t.split;
        item["content"] = base + "_content.ppm";
        item["style"] = base + "_style.ppm";
        item["target"] = base + "_target.ppm";
        manifest["items"].push_back(item);
    }
    std::ofstream mf(dir + "/manifest.json");
    require(mf.good(), "gen_triplets: cannot write manifest in ", dir);
    mf << manifest.dump(2) << "\n";
    require(mf.good(), "gen_triplets: short write of manifest in ", dir);
}

inline std::vector<Triplet> load_dataset(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    require(mf.good(), "load_dataset: cannot open ", dir, "/manifest.json");
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        fail("load_dataset: bad manifest in ", dir, ": ", e.what());
    }
    std::vector<Triplet> out;
    for (const auto& item : manifest.at("items")) {
        Triplet t;
        t.id = item.at("id").get<int>();
        t.seed = item.at("seed").get<std::uint64_t>();
        t.split = item.at("split").get<std::string>();
        t.content = read_ppm(dir + "/" + item.at("content").get<std::string>());
        t.style = read_ppm(dir + "/" + item.at("style").get<std::string>());
        t.target = read_ppm(dir + "/" + item.at("target").get<std::string>());
        out.push_back(std::move(t));
    }
    require(!out.empty(), "load_dataset: empty dataset in ", dir);
    return out;
}

inline std::vector<const Triplet*> split_of(const std::vector<Triplet>& all,
                                            const std::string& split) {
    std::vector<const Triplet*> out;
    for (const Triplet& t : all)
        if (t.split == split) out.push_back(&t);
    return out;
}

}  // namespace stylevar
