#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nca/features.hpp"
#include "nca/ingest.hpp"
#include "nca/util.hpp"

namespace nca {

struct ModelConfig {
    int osm_extract_dim = 256;
    int kg_extract_dim = 256;
    int latent_dim = 128;
    int classifier_hidden_dim = 128;
    bool adversarial_enabled = true;
    double reversal_strength = 1.0;  // lambda at the gradient-reversal boundary
    double learning_rate = 1e-3;
    double discriminator_lr_scale = 1.0;
    // Extra discriminator-only refit steps per batch, taken on the latest
    // OSM+KG latents. Keeping the discriminator near its optimum turns the
    // minimax into plain divergence minimization for the encoder; a
    // discriminator updated at encoder speed orbits instead of converging.
    int discriminator_refit_steps = 10;
    // Decoupled L2 decay on discriminator weights. Caps its confidence at the
    // level the source signal actually supports, so its gradient toward the
    // encoder never saturates; once the latent spaces fuse, the decayed
    // weights settle near zero and its accuracy near chance.
    double discriminator_weight_decay = 0.01;
    // Decoupled L2 decay on the extraction and shared layers. Weights that
    // classification does not actively reinforce decay away, which strips
    // source-specific structure out of the latent space and leaves per-class
    // anchors shared by both sources.
    double encoder_weight_decay = 1.0;
    int epochs = 80;
    int batch_size = 64;
    std::uint64_t seed = 42;

    void validate() const {
        if (osm_extract_dim < 1 || kg_extract_dim < 1 || latent_dim < 1 ||
            classifier_hidden_dim < 1)
            throw std::invalid_argument("all model dimensions must be >= 1");
        if (osm_extract_dim != kg_extract_dim)
            throw std::invalid_argument(
                "osm_extract_dim and kg_extract_dim must match (both feed the shared layer)");
        if (reversal_strength < 0.0)
            throw std::invalid_argument("reversal_strength must be >= 0");
        if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
        if (discriminator_lr_scale <= 0.0)
            throw std::invalid_argument("discriminator_lr_scale must be > 0");
        if (discriminator_refit_steps < 0)
            throw std::invalid_argument("discriminator_refit_steps must be >= 0");
        if (discriminator_weight_decay < 0.0)
            throw std::invalid_argument("discriminator_weight_decay must be >= 0");
        if (encoder_weight_decay < 0.0)
            throw std::invalid_argument("encoder_weight_decay must be >= 0");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    }
};

// Fully connected layer, weights row-major (out x in).
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;

    void resize(std::size_t in_, std::size_t out_) {
        in = in_;
        out = out_;
        w.assign(in * out, 0.0);
        b.assign(out, 0.0);
    }

    void apply(std::span<const double> x, std::vector<double>& y) const {
        y.assign(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = w.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
    }
};

enum class Source { Kg = 0, Osm = 1 };

struct TrainingExample {
    Source source = Source::Osm;
    std::vector<double> input;   // O- or V-dimensional binary vector per source
    std::vector<double> labels;  // multi-hot class vector
};

struct NcaModel {
    ModelConfig config;
    FeatureSpace feature_space;
    Dense osm_extract;    // O -> extract_dim
    Dense kg_extract;     // V -> extract_dim
    Dense shared;         // extract_dim -> latent_dim
    Dense discriminator;  // latent_dim -> 1
    Dense cls_hidden;     // latent_dim -> classifier_hidden_dim
    Dense cls_out;        // classifier_hidden_dim -> |classes|
};

inline std::vector<std::pair<std::string, Dense*>> layer_list(NcaModel& m) {
    return {{"osm_extract", &m.osm_extract}, {"kg_extract", &m.kg_extract},
            {"shared", &m.shared},           {"discriminator", &m.discriminator},
            {"cls_hidden", &m.cls_hidden},   {"cls_out", &m.cls_out}};
}

inline std::vector<std::pair<std::string, const Dense*>> layer_list(const NcaModel& m) {
    return {{"osm_extract", &m.osm_extract}, {"kg_extract", &m.kg_extract},
            {"shared", &m.shared},           {"discriminator", &m.discriminator},
            {"cls_hidden", &m.cls_hidden},   {"cls_out", &m.cls_out}};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void relu_inplace(std::vector<double>& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// Weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
inline NcaModel init_model(FeatureSpace space, const ModelConfig& cfg) {
    cfg.validate();
    if (space.osm_size() == 0 || space.kg_size() == 0 || space.class_count() == 0)
        throw ConfigError("cannot initialize model on an empty feature space");

    NcaModel m;
    m.config = cfg;
    m.feature_space = std::move(space);
    m.osm_extract.resize(m.feature_space.osm_size(), cfg.osm_extract_dim);
    m.kg_extract.resize(m.feature_space.kg_size(), cfg.kg_extract_dim);
    m.shared.resize(cfg.osm_extract_dim, cfg.latent_dim);
    m.discriminator.resize(cfg.latent_dim, 1);
    m.cls_hidden.resize(cfg.latent_dim, cfg.classifier_hidden_dim);
    m.cls_out.resize(cfg.classifier_hidden_dim, m.feature_space.class_count());

    std::mt19937_64 rng(cfg.seed);
    for (auto& [name, layer] : layer_list(m)) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(layer->in));
        for (double& w : layer->w) w = scale * (2.0 * u64_to_unit(rng()) - 1.0);
    }
    return m;
}

struct ForwardPass {
    std::vector<double> extract_pre, extract;
    std::vector<double> shared_pre, latent;
    double disc_pre = 0.0;
    double disc_prob = 0.0;
    std::vector<double> hidden_pre, hidden;
    std::vector<double> logits;
    std::vector<double> probs;
};

inline ForwardPass forward(const NcaModel& m, Source source, std::span<const double> input) {
    const Dense& extract = source == Source::Osm ? m.osm_extract : m.kg_extract;
    if (input.size() != extract.in)
        throw std::invalid_argument("forward: input size " + std::to_string(input.size()) +
                                    " does not match " +
                                    (source == Source::Osm ? std::string("OSM") : std::string("KG")) +
                                    " input layer of size " + std::to_string(extract.in));

    ForwardPass f;
    extract.apply(input, f.extract_pre);
    f.extract = f.extract_pre;
    relu_inplace(f.extract);

    m.shared.apply(f.extract, f.shared_pre);
    f.latent = f.shared_pre;
    relu_inplace(f.latent);

    std::vector<double> disc_out;
    m.discriminator.apply(f.latent, disc_out);
    f.disc_pre = disc_out[0];
    f.disc_prob = sigmoid(f.disc_pre);

    m.cls_hidden.apply(f.latent, f.hidden_pre);
    f.hidden = f.hidden_pre;
    relu_inplace(f.hidden);

    m.cls_out.apply(f.hidden, f.logits);
    f.probs.resize(f.logits.size());
    for (std::size_t j = 0; j < f.logits.size(); ++j) f.probs[j] = sigmoid(f.logits[j]);
    return f;
}

inline constexpr double kBceEpsilon = 1e-12;

// Mean binary cross-entropy over the components of one prediction vector.
inline double bce(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size())
        throw std::invalid_argument("bce: label and prediction lengths differ");
    if (y.empty()) throw std::invalid_argument("bce: empty vectors");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double p = std::clamp(y_hat[i], kBceEpsilon, 1.0 - kBceEpsilon);
        sum += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(y.size());
}

struct LossParts {
    double total = 0.0;
    double classification = 0.0;
    double adverse = 0.0;  // -BCE of the discriminator; <= 0 when enabled
};

inline LossParts loss(const NcaModel& m, std::span<const TrainingExample> batch) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    LossParts parts;
    double disc_bce = 0.0;
    for (const auto& ex : batch) {
        auto f = forward(m, ex.source, ex.input);
        parts.classification += bce(ex.labels, f.probs);
        const double s = ex.source == Source::Osm ? 1.0 : 0.0;
        const double d = std::clamp(f.disc_prob, kBceEpsilon, 1.0 - kBceEpsilon);
        disc_bce += -(s * std::log(d) + (1.0 - s) * std::log(1.0 - d));
    }
    const double n = static_cast<double>(batch.size());
    parts.classification /= n;
    disc_bce /= n;
    parts.adverse = m.config.adversarial_enabled ? -disc_bce : 0.0;
    parts.total = parts.classification + parts.adverse;
    return parts;
}

// The scalar whose mathematical gradient the reversal produces on the shared
// layer and below: classification - lambda * discriminator BCE (zero lambda
// when the adversarial branch is disabled). With lambda = 1 this equals the
// reported total loss.
inline double total_loss_for_gradient(const NcaModel& m, std::span<const TrainingExample> batch) {
    LossParts parts = loss(m, batch);
    const double lambda_eff = m.config.adversarial_enabled ? m.config.reversal_strength : 0.0;
    return parts.classification + lambda_eff * parts.adverse;
}

struct ModelGrads {
    Dense osm_extract, kg_extract, shared, discriminator, cls_hidden, cls_out;

    static ModelGrads zeros_like(const NcaModel& m) {
        ModelGrads g;
        g.osm_extract.resize(m.osm_extract.in, m.osm_extract.out);
        g.kg_extract.resize(m.kg_extract.in, m.kg_extract.out);
        g.shared.resize(m.shared.in, m.shared.out);
        g.discriminator.resize(m.discriminator.in, m.discriminator.out);
        g.cls_hidden.resize(m.cls_hidden.in, m.cls_hidden.out);
        g.cls_out.resize(m.cls_out.in, m.cls_out.out);
        return g;
    }
};

inline std::vector<std::pair<std::string, Dense*>> layer_list(ModelGrads& g) {
    return {{"osm_extract", &g.osm_extract}, {"kg_extract", &g.kg_extract},
            {"shared", &g.shared},           {"discriminator", &g.discriminator},
            {"cls_hidden", &g.cls_hidden},   {"cls_out", &g.cls_out}};
}

// What the backward pass should produce:
//   TrainingUpdate     - reversal contract: discriminator params get the plain
//                        discriminator-BCE gradient; the shared layer and the
//                        extraction layers see that gradient scaled by -lambda.
//   TotalLossMath      - mathematical gradient of total_loss_for_gradient, used
//                        by finite-difference checks (discriminator params get
//                        -lambda times their BCE gradient).
//   ClassificationOnly - gradient of the classification loss alone.
//   DiscriminatorBce   - gradient of the discriminator BCE alone, unscaled.
enum class GradKind { TrainingUpdate, TotalLossMath, ClassificationOnly, DiscriminatorBce };

inline ModelGrads backprop(const NcaModel& m, std::span<const TrainingExample> batch,
                           GradKind kind) {
    if (batch.empty()) throw std::invalid_argument("backprop: empty batch");
    ModelGrads g = ModelGrads::zeros_like(m);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const double lambda_eff =
        m.config.adversarial_enabled ? m.config.reversal_strength : 0.0;
    const bool want_cls = kind != GradKind::DiscriminatorBce;
    const bool want_disc = kind != GradKind::ClassificationOnly;

    std::vector<double> dz, dhidden, dhidden_pre, g_latent_cls, g_latent_disc, g_latent;
    std::vector<double> dlatent_pre, g_extract, dextract_pre;

    for (const auto& ex : batch) {
        auto f = forward(m, ex.source, ex.input);
        const std::size_t classes = f.probs.size();
        if (ex.labels.size() != classes)
            throw std::invalid_argument("backprop: label vector length mismatch");

        g_latent_cls.assign(m.shared.out, 0.0);
        g_latent_disc.assign(m.shared.out, 0.0);

        if (want_cls) {
            // d(mean BCE)/d(logit_j) = (p_j - y_j) / |classes|
            dz.resize(classes);
            for (std::size_t j = 0; j < classes; ++j)
                dz[j] = (f.probs[j] - ex.labels[j]) / static_cast<double>(classes) * inv_n;

            dhidden.assign(m.cls_out.in, 0.0);
            for (std::size_t j = 0; j < classes; ++j) {
                double* wrow = g.cls_out.w.data() + j * m.cls_out.in;
                const double* mrow = m.cls_out.w.data() + j * m.cls_out.in;
                for (std::size_t i = 0; i < m.cls_out.in; ++i) {
                    wrow[i] += dz[j] * f.hidden[i];
                    dhidden[i] += dz[j] * mrow[i];
                }
                g.cls_out.b[j] += dz[j];
            }

            dhidden_pre.resize(m.cls_hidden.out);
            for (std::size_t j = 0; j < m.cls_hidden.out; ++j)
                dhidden_pre[j] = f.hidden_pre[j] > 0.0 ? dhidden[j] : 0.0;

            for (std::size_t j = 0; j < m.cls_hidden.out; ++j) {
                double* wrow = g.cls_hidden.w.data() + j * m.cls_hidden.in;
                const double* mrow = m.cls_hidden.w.data() + j * m.cls_hidden.in;
                for (std::size_t i = 0; i < m.cls_hidden.in; ++i) {
                    wrow[i] += dhidden_pre[j] * f.latent[i];
                    g_latent_cls[i] += dhidden_pre[j] * mrow[i];
                }
                g.cls_hidden.b[j] += dhidden_pre[j];
            }
        }

        double dd = 0.0;
        if (want_disc) {
            const double s = ex.source == Source::Osm ? 1.0 : 0.0;
            dd = (f.disc_prob - s) * inv_n;  // d(disc BCE)/d(disc_pre)
            for (std::size_t i = 0; i < m.discriminator.in; ++i)
                g_latent_disc[i] = dd * m.discriminator.w[i];
        }

        // Discriminator parameters: sign depends on the requested gradient.
        double disc_param_scale = 0.0;
        switch (kind) {
            case GradKind::TrainingUpdate: disc_param_scale = 1.0; break;
            case GradKind::TotalLossMath: disc_param_scale = -lambda_eff; break;
            case GradKind::ClassificationOnly: disc_param_scale = 0.0; break;
            case GradKind::DiscriminatorBce: disc_param_scale = 1.0; break;
        }
        if (want_disc && disc_param_scale != 0.0) {
            for (std::size_t i = 0; i < m.discriminator.in; ++i)
                g.discriminator.w[i] += disc_param_scale * dd * f.latent[i];
            g.discriminator.b[0] += disc_param_scale * dd;
        }

        // Fuse the two paths at the latent vector. The reversal multiplies the
        // discriminator contribution by -lambda at this boundary.
        g_latent.assign(m.shared.out, 0.0);
        double disc_latent_scale = 0.0;
        switch (kind) {
            case GradKind::TrainingUpdate:
            case GradKind::TotalLossMath: disc_latent_scale = -lambda_eff; break;
            case GradKind::ClassificationOnly: disc_latent_scale = 0.0; break;
            case GradKind::DiscriminatorBce: disc_latent_scale = 1.0; break;
        }
        for (std::size_t i = 0; i < m.shared.out; ++i)
            g_latent[i] = (want_cls ? g_latent_cls[i] : 0.0) + disc_latent_scale * g_latent_disc[i];

        dlatent_pre.resize(m.shared.out);
        for (std::size_t j = 0; j < m.shared.out; ++j)
            dlatent_pre[j] = f.shared_pre[j] > 0.0 ? g_latent[j] : 0.0;

        g_extract.assign(m.shared.in, 0.0);
        for (std::size_t j = 0; j < m.shared.out; ++j) {
            double* wrow = g.shared.w.data() + j * m.shared.in;
            const double* mrow = m.shared.w.data() + j * m.shared.in;
            for (std::size_t i = 0; i < m.shared.in; ++i) {
                wrow[i] += dlatent_pre[j] * f.extract[i];
                g_extract[i] += dlatent_pre[j] * mrow[i];
            }
            g.shared.b[j] += dlatent_pre[j];
        }

        const Dense& extract = ex.source == Source::Osm ? m.osm_extract : m.kg_extract;
        Dense& g_ex = ex.source == Source::Osm ? g.osm_extract : g.kg_extract;
        dextract_pre.resize(extract.out);
        for (std::size_t j = 0; j < extract.out; ++j)
            dextract_pre[j] = f.extract_pre[j] > 0.0 ? g_extract[j] : 0.0;
        for (std::size_t j = 0; j < extract.out; ++j) {
            double* wrow = g_ex.w.data() + j * extract.in;
            for (std::size_t i = 0; i < extract.in; ++i) wrow[i] += dextract_pre[j] * ex.input[i];
            g_ex.b[j] += dextract_pre[j];
        }
    }
    return g;
}

// --- optimizer ----------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

struct AdamState {
    ModelGrads m;
    ModelGrads v;
    long long t = 0;

    static AdamState zeros_like(const NcaModel& model) {
        return AdamState{ModelGrads::zeros_like(model), ModelGrads::zeros_like(model), 0};
    }
};

namespace detail {

inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, double lr,
                        double bc1, double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    }
}

inline void check_finite(const std::vector<double>& values, const std::string& what) {
    for (double x : values)
        if (!std::isfinite(x)) throw std::runtime_error("non-finite value in " + what);
}

}  // namespace detail

struct StepResult {
    LossParts losses;
    std::size_t disc_correct = 0;  // discriminator predictions matching the source
};

// One SGD step with Adam per-parameter step sizes. lr_scale anneals the step
// size over training so the adversarial game settles instead of orbiting.
inline StepResult backward_step(NcaModel& model, std::span<const TrainingExample> batch,
                                AdamState& state, double lr_scale = 1.0) {
    if (batch.empty()) throw std::invalid_argument("backward_step: empty batch");
    StepResult result;
    double disc_bce = 0.0;
    for (const auto& ex : batch) {
        auto f = forward(model, ex.source, ex.input);
        result.losses.classification += bce(ex.labels, f.probs);
        const double s = ex.source == Source::Osm ? 1.0 : 0.0;
        const double d = std::clamp(f.disc_prob, kBceEpsilon, 1.0 - kBceEpsilon);
        disc_bce += -(s * std::log(d) + (1.0 - s) * std::log(1.0 - d));
        if ((f.disc_prob > 0.5) == (ex.source == Source::Osm)) ++result.disc_correct;
    }
    const double n = static_cast<double>(batch.size());
    result.losses.classification /= n;
    result.losses.adverse = model.config.adversarial_enabled ? -disc_bce / n : 0.0;
    result.losses.total = result.losses.classification + result.losses.adverse;

    ModelGrads grads = backprop(model, batch, GradKind::TrainingUpdate);
    auto grad_layers = layer_list(grads);
    for (auto& [name, layer] : grad_layers) {
        detail::check_finite(layer->w, "gradient of " + name + " weights");
        detail::check_finite(layer->b, "gradient of " + name + " biases");
    }

    ++state.t;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    auto model_layers = layer_list(model);
    auto m_layers = layer_list(state.m);
    auto v_layers = layer_list(state.v);
    for (std::size_t i = 0; i < model_layers.size(); ++i) {
        const std::string& name = model_layers[i].first;
        double lr = model.config.learning_rate * lr_scale;
        const bool is_disc = name == "discriminator";
        const bool is_encoder =
            name == "osm_extract" || name == "kg_extract" || name == "shared";
        if (is_disc) lr *= model.config.discriminator_lr_scale;
        detail::adam_update(model_layers[i].second->w, grad_layers[i].second->w,
                            m_layers[i].second->w, v_layers[i].second->w, lr, bc1, bc2);
        detail::adam_update(model_layers[i].second->b, grad_layers[i].second->b,
                            m_layers[i].second->b, v_layers[i].second->b, lr, bc1, bc2);
        double decay = 0.0;
        if (is_disc) decay = lr * model.config.discriminator_weight_decay;
        if (is_encoder) decay = lr * model.config.encoder_weight_decay;
        if (decay > 0.0) {
            for (double& w : model_layers[i].second->w) w -= decay * w;
            // extraction biases are per-source constants in the latent, so
            // they decay too unless classification actively holds them
            if (is_encoder)
                for (double& b : model_layers[i].second->b) b -= decay * b;
        }
    }
    for (auto& [name, layer] : model_layers) {
        detail::check_finite(layer->w, name + " weights after step");
        detail::check_finite(layer->b, name + " biases after step");
    }
    return result;
}

// Discriminator-only Adam steps over stored (latent, source) pairs from the
// most recent batch of each source. Linear problem, so a handful of steps per
// batch keeps the adversary close to optimal.
struct DiscRefitState {
    std::vector<double> mw, vw;
    double mb = 0.0, vb = 0.0;
    long long t = 0;
};

inline void discriminator_refit(NcaModel& model,
                                std::span<const std::pair<std::vector<double>, double>> pool,
                                DiscRefitState& state, int steps, double lr) {
    if (pool.empty() || steps <= 0) return;
    Dense& disc = model.discriminator;
    if (state.mw.size() != disc.w.size()) {
        state.mw.assign(disc.w.size(), 0.0);
        state.vw.assign(disc.w.size(), 0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(pool.size());
    std::vector<double> gw(disc.w.size());
    for (int s = 0; s < steps; ++s) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (const auto& [latent, source] : pool) {
            double a = disc.b[0];
            for (std::size_t i = 0; i < disc.in; ++i) a += disc.w[i] * latent[i];
            const double dd = (sigmoid(a) - source) * inv_n;
            for (std::size_t i = 0; i < disc.in; ++i) gw[i] += dd * latent[i];
            gb += dd;
        }
        ++state.t;
        const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
        const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
        detail::adam_update(disc.w, gw, state.mw, state.vw, lr, bc1, bc2);
        std::vector<double> b_grad{gb}, mb{state.mb}, vb{state.vb};
        detail::adam_update(disc.b, b_grad, mb, vb, lr, bc1, bc2);
        state.mb = mb[0];
        state.vb = vb[0];
        const double decay = lr * model.config.discriminator_weight_decay;
        for (double& w : disc.w) w -= decay * w;
    }
}

// --- training -----------------------------------------------------------------

struct EpochStats {
    int epoch = 0;
    double classification_loss = 0.0;
    double adverse_loss = 0.0;
    double discriminator_accuracy = 0.0;
};

struct TrainResult {
    NcaModel model;
    std::vector<EpochStats> log;
    std::size_t osm_examples = 0;
    std::size_t kg_examples = 0;
    std::size_t skipped_unlabeled = 0;
};

struct ExamplePools {
    std::vector<TrainingExample> osm;
    std::vector<TrainingExample> kg;
    std::size_t skipped_unlabeled = 0;
};

// OSM examples: one per link, the node encoding labeled with the classes of
// the linked KG entity. KG examples: one per entity carrying at least one
// retained class.
inline ExamplePools build_example_pools(const Dataset& dataset, const FeatureSpace& space) {
    ExamplePools pools;
    for (const auto& link : dataset.links) {
        const auto& node = dataset.nodes.at(link.node_id);
        const auto& entity = dataset.entities.at(link.entity_iri);
        auto labels = encode_labels(entity.classes, space);
        if (all_zero(labels)) {
            ++pools.skipped_unlabeled;
            continue;
        }
        pools.osm.push_back({Source::Osm, encode_osm(node, space), std::move(labels)});
    }
    for (const auto& [iri, entity] : dataset.entities) {
        auto labels = encode_labels(entity.classes, space);
        if (all_zero(labels)) continue;
        pools.kg.push_back({Source::Kg, encode_kg(entity, space), std::move(labels)});
    }
    return pools;
}

namespace detail {

template <typename T>
inline void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace detail

inline TrainResult train(const Dataset& dataset, const FeatureSpace& space,
                         const ModelConfig& cfg) {
    cfg.validate();
    if (dataset.links.empty()) throw ConfigError("train: dataset has no linked entities");
    if (dataset.classes.empty()) throw ConfigError("train: dataset has no retained classes");

    ExamplePools pools = build_example_pools(dataset, space);
    if (pools.osm.empty() || pools.kg.empty())
        throw ConfigError("train: empty example pool after label encoding");

    TrainResult result;
    result.model = init_model(space, cfg);
    result.osm_examples = pools.osm.size();
    result.kg_examples = pools.kg.size();
    result.skipped_unlabeled = pools.skipped_unlabeled;

    AdamState adam = AdamState::zeros_like(result.model);
    DiscRefitState disc_refit;
    std::vector<std::pair<std::vector<double>, double>> replay_osm, replay_kg, replay;
    // Tail averaging over the last quarter of training. The adversarial pair
    // orbits its saddle point at the annealed floor; the averaged iterate is
    // the equilibrium, where the last live iterate is a random phase of the
    // swing. Averaging the whole model keeps encoder and discriminator in a
    // consistent phase relation.
    ModelGrads tail_sum = ModelGrads::zeros_like(result.model);
    std::size_t tail_count = 0;
    const int tail_start = cfg.epochs - std::max(cfg.epochs / 4, 1);
    std::uint64_t stream = cfg.seed ^ 0x5ca1ab1e5eed5ull;
    std::mt19937_64 shuffle_rng(splitmix64(stream));

    const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // linear step-size decay with a floor: annealing damps the adversarial
        // oscillation, the floor keeps the game equilibrating instead of
        // freezing it mid-swing
        const double lr_scale = std::max(
            1.0 - static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs), 0.05);
        detail::fisher_yates(pools.osm, shuffle_rng);
        detail::fisher_yates(pools.kg, shuffle_rng);

        auto batch_count = [&](const std::vector<TrainingExample>& pool) {
            return (pool.size() + batch_size - 1) / batch_size;
        };
        const std::size_t n_osm = batch_count(pools.osm);
        const std::size_t n_kg = batch_count(pools.kg);

        double cls_sum = 0.0, adv_sum = 0.0;
        std::size_t examples = 0, disc_correct = 0;
        auto run_batch = [&](const std::vector<TrainingExample>& pool, std::size_t index) {
            const std::size_t begin = index * batch_size;
            const std::size_t end = std::min(begin + batch_size, pool.size());
            std::span<const TrainingExample> batch(pool.data() + begin, end - begin);
            StepResult step = backward_step(result.model, batch, adam, lr_scale);
            cls_sum += step.losses.classification * static_cast<double>(batch.size());
            adv_sum += step.losses.adverse * static_cast<double>(batch.size());
            examples += batch.size();
            disc_correct += step.disc_correct;

            if (cfg.adversarial_enabled && cfg.discriminator_refit_steps > 0) {
                auto& slot = batch.front().source == Source::Osm ? replay_osm : replay_kg;
                slot.clear();
                for (const auto& ex : batch) {
                    auto f = forward(result.model, ex.source, ex.input);
                    slot.emplace_back(std::move(f.latent),
                                      ex.source == Source::Osm ? 1.0 : 0.0);
                }
                if (!replay_osm.empty() && !replay_kg.empty()) {
                    replay.clear();
                    replay.insert(replay.end(), replay_osm.begin(), replay_osm.end());
                    replay.insert(replay.end(), replay_kg.begin(), replay_kg.end());
                    discriminator_refit(result.model, replay, disc_refit,
                                        cfg.discriminator_refit_steps,
                                        cfg.learning_rate * cfg.discriminator_lr_scale *
                                            lr_scale);
                }
            }
            if (epoch > tail_start) {
                auto model_layers = layer_list(result.model);
                auto sum_layers = layer_list(tail_sum);
                for (std::size_t li = 0; li < model_layers.size(); ++li) {
                    const Dense& src = *model_layers[li].second;
                    Dense& dst = *sum_layers[li].second;
                    for (std::size_t i = 0; i < src.w.size(); ++i) dst.w[i] += src.w[i];
                    for (std::size_t i = 0; i < src.b.size(); ++i) dst.b[i] += src.b[i];
                }
                ++tail_count;
            }
        };

        // Strict alternation: OSM, KG, OSM, KG, ...; the longer pool drains last.
        for (std::size_t i = 0; i < std::max(n_osm, n_kg); ++i) {
            if (i < n_osm) run_batch(pools.osm, i);
            if (i < n_kg) run_batch(pools.kg, i);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.classification_loss = cls_sum / static_cast<double>(examples);
        stats.adverse_loss = adv_sum / static_cast<double>(examples);
        stats.discriminator_accuracy =
            static_cast<double>(disc_correct) / static_cast<double>(examples);
        result.log.push_back(stats);
        log_debug("epoch " + std::to_string(epoch) +
                  " classification=" + std::to_string(stats.classification_loss) +
                  " adverse=" + std::to_string(stats.adverse_loss) +
                  " disc_acc=" + std::to_string(stats.discriminator_accuracy));
    }

    if (tail_count > 0) {
        auto model_layers = layer_list(result.model);
        auto sum_layers = layer_list(tail_sum);
        for (std::size_t li = 0; li < model_layers.size(); ++li) {
            Dense& dst = *model_layers[li].second;
            const Dense& src = *sum_layers[li].second;
            for (std::size_t i = 0; i < dst.w.size(); ++i)
                dst.w[i] = src.w[i] / static_cast<double>(tail_count);
            for (std::size_t i = 0; i < dst.b.size(); ++i)
                dst.b[i] = src.b[i] / static_cast<double>(tail_count);
        }
    }
    return result;
}

// --- checkpoint ---------------------------------------------------------------

inline constexpr const char* kModelFormat = "nca-model";
inline constexpr int kModelVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return nlohmann::json{{"osm_extract_dim", cfg.osm_extract_dim},
                          {"kg_extract_dim", cfg.kg_extract_dim},
                          {"latent_dim", cfg.latent_dim},
                          {"classifier_hidden_dim", cfg.classifier_hidden_dim},
                          {"adversarial_enabled", cfg.adversarial_enabled},
                          {"reversal_strength", cfg.reversal_strength},
                          {"learning_rate", cfg.learning_rate},
                          {"discriminator_lr_scale", cfg.discriminator_lr_scale},
                          {"discriminator_refit_steps", cfg.discriminator_refit_steps},
                          {"discriminator_weight_decay", cfg.discriminator_weight_decay},
                          {"encoder_weight_decay", cfg.encoder_weight_decay},
                          {"epochs", cfg.epochs},
                          {"batch_size", cfg.batch_size},
                          {"seed", cfg.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.osm_extract_dim = j.at("osm_extract_dim").get<int>();
    cfg.kg_extract_dim = j.at("kg_extract_dim").get<int>();
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.classifier_hidden_dim = j.at("classifier_hidden_dim").get<int>();
    cfg.adversarial_enabled = j.at("adversarial_enabled").get<bool>();
    cfg.reversal_strength = j.at("reversal_strength").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.discriminator_lr_scale = j.at("discriminator_lr_scale").get<double>();
    cfg.discriminator_refit_steps = j.at("discriminator_refit_steps").get<int>();
    cfg.discriminator_weight_decay = j.at("discriminator_weight_decay").get<double>();
    cfg.encoder_weight_decay = j.at("encoder_weight_decay").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

inline void save_model(const NcaModel& model, const std::string& path) {
    nlohmann::json layers;
    for (const auto& [name, layer] : layer_list(model)) {
        layers[name] = {{"in", layer->in},
                        {"out", layer->out},
                        {"w", layer->w},
                        {"b", layer->b}};
    }
    nlohmann::json j{{"format", kModelFormat},
                     {"version", kModelVersion},
                     {"config", model_config_to_json(model.config)},
                     {"feature_space", feature_space_to_json(model.feature_space)},
                     {"layers", layers}};
    write_file(path, j.dump(2) + "\n");
}

inline NcaModel load_model(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("corrupt model checkpoint " + path + ": " + e.what());
    }
    if (!j.contains("format") || j.at("format").get<std::string>() != kModelFormat)
        throw ConfigError("not a model checkpoint: " + path);
    if (!j.contains("version") || j.at("version").get<int>() != kModelVersion)
        throw ConfigError("unsupported model checkpoint version in " + path + " (expected " +
                          std::to_string(kModelVersion) + ")");

    NcaModel model;
    try {
        model.config = model_config_from_json(j.at("config"));
        model.feature_space = feature_space_from_json(j.at("feature_space"));
        for (auto& [name, layer] : layer_list(model)) {
            const auto& lj = j.at("layers").at(name);
            layer->in = lj.at("in").get<std::size_t>();
            layer->out = lj.at("out").get<std::size_t>();
            layer->w = lj.at("w").get<std::vector<double>>();
            layer->b = lj.at("b").get<std::vector<double>>();
            if (layer->w.size() != layer->in * layer->out || layer->b.size() != layer->out)
                throw ConfigError("inconsistent layer shape for " + name);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("corrupt model checkpoint " + path + ": " + e.what());
    }
    if (model.osm_extract.in != model.feature_space.osm_size() ||
        model.kg_extract.in != model.feature_space.kg_size() ||
        model.cls_out.out != model.feature_space.class_count())
        throw ConfigError("checkpoint layer shapes disagree with its feature space: " + path);
    return model;
}

}  // namespace nca
