#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stylevar/tensor.hpp"

namespace stylevar {

// Named, ordered collection of trainable tensors. Order is the iteration
// order everywhere (optimizer, clipping, checkpoints), which keeps every
// reduction deterministic.
class ParamSet {
public:
    void add(const std::string& name, const Tensor& t) {
        require(t.requires_grad(), "ParamSet: parameter ", name, " must require grad");
        for (const auto& e : items_) require(e.name != name, "ParamSet: duplicate name ", name);
        items_.push_back({name, t});
    }

    const Tensor& find(const std::string& name) const {
        for (const auto& e : items_)
            if (e.name == name) return e.tensor;
        fail("ParamSet: no parameter named ", name);
    }
    bool contains(const std::string& name) const {
        for (const auto& e : items_)
            if (e.name == name) return true;
        return false;
    }

    std::size_t size() const { return items_.size(); }
    const std::string& name(std::size_t i) const { return items_[i].name; }
    Tensor& tensor(std::size_t i) { return items_[i].tensor; }
    const Tensor& tensor(std::size_t i) const { return items_[i].tensor; }

    void zero_grad() {
        for (auto& e : items_) e.tensor.zero_grad();
    }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (const auto& e : items_) n += e.tensor.numel();
        return n;
    }

private:
    struct Entry {
        std::string name;
        Tensor tensor;
    };
    std::vector<Entry> items_;
};

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm. All-zero gradients pass through.
inline real clip_global_norm(ParamSet& params, real max_norm) {
    real sq = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& t = params.tensor(i);
        if (!t.has_grad()) continue;
        for (real g : t.grad()) {
            require(std::isfinite(g), "clip_global_norm: non-finite gradient in ", params.name(i));
            sq += g * g;
        }
    }
    real norm = std::sqrt(sq);
    if (norm > max_norm) {
        real scale = max_norm / norm;
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& t = params.tensor(i);
            if (!t.has_grad()) continue;
            for (real& g : t.mutable_grad()) g *= scale;
        }
    }
    return norm;
}

struct AdamWConfig {
    real lr = real(1e-5);
    real beta1 = real(0.9);
    real beta2 = real(0.95);
    real eps = real(1e-8);
    real weight_decay = real(0.01);
};

// AdamW with bias-corrected moments and decoupled weight decay
// (p <- p * (1 - lr*wd) before the adaptive step).
class AdamW {
public:
    AdamW() = default;
    AdamW(const ParamSet& params, AdamWConfig cfg) : cfg_(cfg) { attach(params); }

    void attach(const ParamSet& params) {
        m_.clear();
        v_.clear();
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_.emplace_back(params.tensor(i).numel(), real(0));
            v_.emplace_back(params.tensor(i).numel(), real(0));
        }
        step_count_ = 0;
    }

    // lr < 0 means "use configured lr".
    void step(ParamSet& params, real lr = real(-1)) {
        require(m_.size() == params.size(), "AdamW: optimizer not attached to this parameter set");
        if (lr < 0) lr = cfg_.lr;
        ++step_count_;
        real bc1 = real(1) - std::pow(cfg_.beta1, static_cast<real>(step_count_));
        real bc2 = real(1) - std::pow(cfg_.beta2, static_cast<real>(step_count_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& t = params.tensor(i);
            require(t.has_grad(), "AdamW: missing grad for parameter ", params.name(i));
            const std::vector<real>& g = t.grad();
            std::vector<real>& p = t.mutable_data();
            std::vector<real>& m = m_[i];
            std::vector<real>& v = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                p[j] *= real(1) - lr * cfg_.weight_decay;
                m[j] = cfg_.beta1 * m[j] + (real(1) - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (real(1) - cfg_.beta2) * g[j] * g[j];
                real mhat = m[j] / bc1;
                real vhat = v[j] / bc2;
                p[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    const AdamWConfig& config() const { return cfg_; }
    long step_count() const { return step_count_; }
    void set_step_count(long s) { step_count_ = s; }
    std::vector<std::vector<real>>& first_moments() { return m_; }
    std::vector<std::vector<real>>& second_moments() { return v_; }

private:
    AdamWConfig cfg_;
    std::vector<std::vector<real>> m_;
    std::vector<std::vector<real>> v_;
    long step_count_ = 0;
};

}  // namespace stylevar
