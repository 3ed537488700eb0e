#pragma once

// Adam fit of the UNSO coefficients a_1..a_{N-1} (and of per-step Cesista
// parameters) so that the scalar map approximates 1 on (0, 1).
//
// Loss per sample x with residual r = f(x) - 1:
//
//   r^2 + overshoot_weight * max(r, 0)^2
//
// averaged over a fresh uniform batch every step.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iteration_steps.hpp"
#include "random.hpp"
#include "scalar_poly.hpp"

namespace unso {

struct TrainConfig {
    int order = 14;
    BRule rule = BRule::AbsAlg1;
    double learning_rate = 1e-1;
    double decay_factor = 0.5;
    int decay_every = 10000;
    int epochs = 20000;
    int samples_per_step = 1000;
    double sample_low = 0.0;
    double sample_high = 1.0;
    double overshoot_weight = 5.0;
    double init_value = 1.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (order < 1 || order > 40)
            throw std::invalid_argument("order must be in [1, 40]");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("learning_rate must be > 0");
        if (!(decay_factor > 0.0 && decay_factor <= 1.0))
            throw std::invalid_argument("decay_factor must be in (0, 1]");
        if (decay_every < 1)
            throw std::invalid_argument("decay_every must be >= 1");
        if (epochs < 0)
            throw std::invalid_argument("epochs must be >= 0");
        if (samples_per_step < 1)
            throw std::invalid_argument("samples_per_step must be >= 1");
        if (!(sample_low >= 0.0 && sample_low < sample_high && sample_high <= 1.0))
            throw std::invalid_argument("need 0 <= sample_low < sample_high <= 1");
        if (!(overshoot_weight >= 0.0))
            throw std::invalid_argument("overshoot_weight must be >= 0");
    }
};

/// Step-decay schedule: learning_rate * decay_factor^floor(step / decay_every).
inline double lr_at(const TrainConfig& cfg, long step)
{
    return cfg.learning_rate * std::pow(cfg.decay_factor, static_cast<double>(step / cfg.decay_every));
}

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    /// One bias-corrected update; `t` is the 1-based step number.
    void apply(std::span<double> params, std::span<const double> grad, double lr, long t)
    {
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

struct TrainState {
    CoefficientSet coeffs;
    AdamMoments adam;
    long step = 0;
    double current_lr = 0.0;
    std::vector<double> loss_history; // batch loss before each update
};

struct TrainingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Loss or coefficients became NaN/Inf; carries the last finite state.
struct TrainingDiverged : TrainingFailure {
    TrainingDiverged(const std::string& what, TrainState last) : TrainingFailure(what), last_finite(std::move(last)) {}
    TrainState last_finite;
};

/// Batch of `count` uniform samples from (low, high) for one training step.
inline std::vector<double> sample_batch(const TrainConfig& cfg, long step)
{
    const CounterRng rng(cfg.seed);
    std::vector<double> xs(cfg.samples_per_step);
    const auto base = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(cfg.samples_per_step);
    for (int i = 0; i < cfg.samples_per_step; ++i)
        xs[i] = cfg.sample_low + (cfg.sample_high - cfg.sample_low) * rng.uniform(base + i);
    return xs;
}

inline double sample_loss(double residual, double overshoot_weight) noexcept
{
    const double over = residual > 0.0 ? residual : 0.0;
    return residual * residual + overshoot_weight * over * over;
}

inline double sample_loss_slope(double residual, double overshoot_weight) noexcept
{
    const double over = residual > 0.0 ? residual : 0.0;
    return 2.0 * residual + 2.0 * overshoot_weight * over;
}

inline double loss(const CoefficientSet& c, std::span<const double> xs, double overshoot_weight = 0.0)
{
    if (xs.empty())
        throw std::invalid_argument("loss: empty sample set");
    const double b = derive_b(c);
    double total = 0.0;
    for (double x : xs)
        total += sample_loss(eval_f(c, b, x) - 1.0, overshoot_weight);
    return total / static_cast<double>(xs.size());
}

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

inline LossAndGradient loss_and_gradient(const CoefficientSet& c, std::span<const double> xs,
                                         double overshoot_weight = 0.0)
{
    if (xs.empty())
        throw std::invalid_argument("loss: empty sample set");
    const int n = c.order;
    const double b = derive_b(c);
    const auto db = derive_b_gradient(c);
    LossAndGradient out{0.0, std::vector<double>(n - 1, 0.0)};
    std::array<double, 41> t{};
    for (double x : xs) {
        detail::check_unit_interval(x);
        term_values_into(n, x, t.data());
        double f = t[0];
        for (int k = 1; k < n; ++k)
            f += c.a[k - 1] * t[k];
        f += b * t[n];
        const double r = f - 1.0;
        out.loss += sample_loss(r, overshoot_weight);
        const double slope = sample_loss_slope(r, overshoot_weight);
        for (int k = 1; k < n; ++k)
            out.gradient[k - 1] += slope * (t[k] + db[k - 1] * t[n]);
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    out.loss *= inv;
    for (auto& g : out.gradient)
        g *= inv;
    return out;
}

inline TrainState initial_state(const TrainConfig& cfg)
{
    TrainState s;
    s.coeffs = CoefficientSet::constant(cfg.order, cfg.init_value, cfg.rule);
    s.adam = AdamMoments(s.coeffs.a.size());
    s.current_lr = lr_at(cfg, 0);
    return s;
}

inline TrainState train(const TrainConfig& cfg)
{
    cfg.validate();
    TrainState state = initial_state(cfg);
    state.loss_history.reserve(cfg.epochs);
    for (long s = 0; s < cfg.epochs; ++s) {
        const auto xs = sample_batch(cfg, s);
        const auto lg = loss_and_gradient(state.coeffs, xs, cfg.overshoot_weight);
        bool finite = std::isfinite(lg.loss);
        for (double g : lg.gradient)
            finite = finite && std::isfinite(g);
        if (!finite)
            throw TrainingDiverged("training diverged at step " + std::to_string(s), state);

        const auto saved_coeffs = state.coeffs;
        const auto saved_adam = state.adam;
        state.adam.apply(state.coeffs.a, lg.gradient, lr_at(cfg, s), s + 1);
        for (double a : state.coeffs.a)
            finite = finite && std::isfinite(a);
        if (!finite) {
            state.coeffs = saved_coeffs;
            state.adam = saved_adam;
            throw TrainingDiverged("training diverged at step " + std::to_string(s), std::move(state));
        }
        state.loss_history.push_back(lg.loss);
        state.step = s + 1;
        state.current_lr = lr_at(cfg, s + 1);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Per-step Cesista parameters, trained through the composed map.

enum class CesistaInit { Muon, Identity };

// Composing five quintics amplifies parameter steps; at 0.1 the iterates
// leave the basin within a few hundred steps.
inline constexpr double kCesistaLearningRate = 1e-3;

struct CesistaTrainState {
    std::vector<CesistaStep> steps;
    AdamMoments adam;
    long step = 0;
    double current_lr = 0.0;
    std::vector<double> loss_history;
};

struct CesistaTrainingDiverged : TrainingFailure {
    CesistaTrainingDiverged(const std::string& what, CesistaTrainState last)
        : TrainingFailure(what), last_finite(std::move(last)) {}
    CesistaTrainState last_finite;
};

inline double composed_loss(std::span<const CesistaStep> steps, std::span<const double> xs,
                            double overshoot_weight = 0.0)
{
    if (xs.empty())
        throw std::invalid_argument("loss: empty sample set");
    double total = 0.0;
    for (double x : xs)
        total += sample_loss(compose(steps, x) - 1.0, overshoot_weight);
    return total / static_cast<double>(xs.size());
}

inline std::vector<CesistaStep> cesista_initial_steps(int count, CesistaInit init)
{
    if (count < 1)
        throw std::invalid_argument("need at least one Cesista step");
    const CesistaStep s = init == CesistaInit::Muon ? reparameterize(kMuonStep) : CesistaStep{};
    return std::vector<CesistaStep>(count, s);
}

/// Central-difference gradient of the composed loss, parameters ordered
/// (gamma, r, l) per step.
inline std::vector<double> composed_loss_gradient(std::vector<CesistaStep> steps, std::span<const double> xs,
                                                  double overshoot_weight, double h = 1e-6)
{
    std::vector<double> grad(3 * steps.size());
    auto field = [&](std::size_t i) -> double& {
        auto& s = steps[i / 3];
        return i % 3 == 0 ? s.gamma : (i % 3 == 1 ? s.r : s.l);
    };
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double saved = field(i);
        field(i) = saved + h;
        const double up = composed_loss(steps, xs, overshoot_weight);
        field(i) = saved - h;
        const double down = composed_loss(steps, xs, overshoot_weight);
        field(i) = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline CesistaTrainState train_cesista(int step_count, const TrainConfig& cfg, CesistaInit init = CesistaInit::Muon)
{
    cfg.validate();
    CesistaTrainState state;
    state.steps = cesista_initial_steps(step_count, init);
    state.adam = AdamMoments(3 * state.steps.size());
    state.current_lr = lr_at(cfg, 0);
    state.loss_history.reserve(cfg.epochs);

    std::vector<double> params(3 * state.steps.size());
    for (long s = 0; s < cfg.epochs; ++s) {
        const auto xs = sample_batch(cfg, s);
        const double l = composed_loss(state.steps, xs, cfg.overshoot_weight);
        const auto grad = composed_loss_gradient(state.steps, xs, cfg.overshoot_weight);
        bool finite = std::isfinite(l);
        for (double g : grad)
            finite = finite && std::isfinite(g);
        if (!finite)
            throw CesistaTrainingDiverged("cesista training diverged at step " + std::to_string(s), std::move(state));

        for (std::size_t i = 0; i < state.steps.size(); ++i) {
            params[3 * i] = state.steps[i].gamma;
            params[3 * i + 1] = state.steps[i].r;
            params[3 * i + 2] = state.steps[i].l;
        }
        const auto saved_adam = state.adam;
        state.adam.apply(params, grad, lr_at(cfg, s), s + 1);
        for (double p : params)
            if (!std::isfinite(p)) {
                state.adam = saved_adam;
                throw CesistaTrainingDiverged("cesista training diverged at step " + std::to_string(s),
                                              std::move(state));
            }
        for (std::size_t i = 0; i < state.steps.size(); ++i)
            state.steps[i] = {params[3 * i], params[3 * i + 1], params[3 * i + 2]};
        state.loss_history.push_back(l);
        state.step = s + 1;
        state.current_lr = lr_at(cfg, s + 1);
    }
    return state;
}

} // namespace unso
