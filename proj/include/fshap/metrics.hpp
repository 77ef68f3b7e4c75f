#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fshap/error.hpp"
#include "fshap/game.hpp"
#include "fshap/model.hpp"
#include "fshap/rng.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

enum class PerturbationKind { gaussian, patch_baseline };

// A "meaningful perturbation" P with its sampling distribution. gaussian:
// i.i.d. N(0, sigma^2) per pixel. patch-baseline: P = I - I', where I' is
// the image with one randomly placed patch replaced by the baseline image.
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::gaussian;
    double sigma = 0.1;  // fraction of the [0,1] dynamic range
    int patch_size = 2;
    int num_samples = 256;
    std::uint64_t seed = 0;
    Image baseline_image;  // used by patch-baseline; empty means zeros

    void validate() const {
        require(num_samples >= 1, "parameter-error", "num_samples must be >= 1");
        if (kind == PerturbationKind::gaussian) {
            require(sigma > 0.0, "parameter-error", "sigma must be positive");
        } else {
            require(patch_size >= 1, "parameter-error", "patch_size must be >= 1");
        }
    }
};

namespace detail {

inline Vector draw_perturbation(const PerturbationSpec& pert, const Image& image, int index) {
    auto eng = rng::engine(pert.seed, "perturbation", static_cast<std::uint64_t>(index));
    const Shape& shape = image.shape;
    if (pert.kind == PerturbationKind::gaussian) {
        std::normal_distribution<double> normal(0.0, pert.sigma);
        Vector p(shape.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal(eng);
        return p;
    }
    const Image& baseline = pert.baseline_image.data.size() == 0
                                ? Image::zeros(shape)
                                : pert.baseline_image;
    require(baseline.shape == shape, "shape-mismatch",
            "perturbation baseline shape does not match image");
    const int pw = std::min(pert.patch_size, shape.width);
    const int ph = std::min(pert.patch_size, shape.height);
    std::uniform_int_distribution<int> dw(0, shape.width - pw);
    std::uniform_int_distribution<int> dh(0, shape.height - ph);
    const int w0 = dw(eng);
    const int h0 = dh(eng);
    Vector p = Vector::Zero(shape.size());
    for (int c = 0; c < shape.channels; ++c) {
        for (int w = w0; w < w0 + pw; ++w) {
            for (int h = h0; h < h0 + ph; ++h) {
                const int i = shape.index(c, w, h);
                p[i] = image.data[i] - baseline.data[i];
            }
        }
    }
    return p;
}

}  // namespace detail

// Monte Carlo estimate of E_P[(P^T psi - (f(I) - f(I-P)))^2]: the expected
// squared residual of the attribution's first-order prediction of the
// confidence change at class_index.
inline double infidelity(const BlackBoxModel& model, const Image& image,
                         const SaliencyMap& saliency, const PerturbationSpec& pert,
                         int class_index) {
    pert.validate();
    require(image.shape == model.input_shape && saliency.shape == image.shape, "shape-mismatch",
            "model, image and saliency shapes must agree");
    require(class_index >= 0 && class_index < model.num_classes(), "index-error",
            "class index out of range");

    const double f_base = forward(model, image)[class_index];
    double acc = 0.0;
    for (int k = 0; k < pert.num_samples; ++k) {
        Vector p = detail::draw_perturbation(pert, image, k);
        const double f_pert =
            forward_flat(model, image.data - p)[class_index];
        const double residual = p.dot(saliency.values) - (f_base - f_pert);
        acc += residual * residual;
    }
    return acc / pert.num_samples;
}

using Explainer = std::function<SaliencyMap(const BlackBoxModel&, const Image&)>;

// Monte Carlo lower bound of max_{||I'-I||_2 <= r} ||psi(f,I') - psi(f,I)||_2.
// Probes are drawn uniformly in the r-ball from seeded substreams.
inline double sensitivity(const Explainer& explainer, const BlackBoxModel& model,
                          const Image& image, double radius, int num_probes,
                          std::uint64_t seed) {
    require(radius >= 0.0, "parameter-error", "radius must be nonnegative");
    require(num_probes >= 1, "parameter-error", "num_probes must be >= 1");

    const SaliencyMap base = explainer(model, image);
    const int n = image.shape.size();
    double worst = 0.0;
    for (int j = 0; j < num_probes; ++j) {
        auto eng = rng::engine(seed, "probe", static_cast<std::uint64_t>(j));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vector direction(n);
        for (int i = 0; i < n; ++i) direction[i] = normal(eng);
        const double norm = direction.norm();
        if (norm == 0.0) continue;
        const double rho = radius * std::pow(unit(eng), 1.0 / n);
        Image probed(image.shape, image.data + (rho / norm) * direction);
        worst = std::max(worst, (explainer(model, probed).values - base.values).norm());
    }
    return worst;
}

// Sensitivity estimates over an ascending radius grid sharing one master
// probe set: probes are drawn once inside the largest ball (radii linearly
// distributed so small radii keep probes) and each radius uses the probes
// whose offset norm fits. Probe sets are nested, so the estimates are
// non-decreasing in the radius by construction.
inline std::vector<double> sensitivity_curve(const Explainer& explainer,
                                             const BlackBoxModel& model, const Image& image,
                                             const std::vector<double>& radii, int num_probes,
                                             std::uint64_t seed) {
    require(!radii.empty(), "parameter-error", "radii must be non-empty");
    require(num_probes >= 1, "parameter-error", "num_probes must be >= 1");
    double r_max = 0.0;
    for (double r : radii) {
        require(r >= 0.0, "parameter-error", "radius must be nonnegative");
        r_max = std::max(r_max, r);
    }

    const SaliencyMap base = explainer(model, image);
    const int n = image.shape.size();
    std::vector<std::pair<double, double>> probes;  // (offset norm, map distance)
    probes.reserve(num_probes);
    for (int j = 0; j < num_probes; ++j) {
        auto eng = rng::engine(seed, "probe", static_cast<std::uint64_t>(j));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vector direction(n);
        for (int i = 0; i < n; ++i) direction[i] = normal(eng);
        const double norm = direction.norm();
        if (norm == 0.0) continue;
        const double rho = r_max * unit(eng);
        Image probed(image.shape, image.data + (rho / norm) * direction);
        probes.emplace_back(rho, (explainer(model, probed).values - base.values).norm());
    }
    std::vector<double> out;
    out.reserve(radii.size());
    for (double r : radii) {
        double worst = 0.0;
        for (const auto& [rho, dist] : probes) {
            if (rho <= r) worst = std::max(worst, dist);
        }
        out.push_back(worst);
    }
    return out;
}

inline SaliencyMap baseline_gradient(const BlackBoxModel& model, const Image& image,
                                     int class_index,
                                     GradientTarget target = GradientTarget::confidence) {
    return input_gradient(model, image, class_index, target);
}

// Integrated gradients with an m-step Riemann midpoint rule along the
// straight-line path from the baseline: (I - baseline) (.) mean gradient.
inline SaliencyMap baseline_integrated_gradients(const BlackBoxModel& model, const Image& image,
                                                 int class_index, int steps,
                                                 const Image& baseline,
                                                 GradientTarget target =
                                                     GradientTarget::confidence) {
    require(steps >= 1, "parameter-error", "steps must be >= 1");
    require(image.shape == baseline.shape, "shape-mismatch",
            "baseline shape does not match image");
    const Vector delta = image.data - baseline.data;
    Vector mean_grad = Vector::Zero(image.shape.size());
    for (int k = 0; k < steps; ++k) {
        const double t = (k + 0.5) / steps;
        Vector point = baseline.data + t * delta;
        mean_grad += input_gradient_flat(model, point, class_index, target);
    }
    mean_grad /= steps;
    return SaliencyMap(image.shape, delta.cwiseProduct(mean_grad), MapSource::baseline_method);
}

// Mean gradient over n gaussian-jittered copies of the image.
inline SaliencyMap baseline_smoothgrad(const BlackBoxModel& model, const Image& image,
                                       int class_index, int samples, double sigma,
                                       std::uint64_t seed,
                                       GradientTarget target = GradientTarget::confidence) {
    require(samples >= 1, "parameter-error", "samples must be >= 1");
    require(sigma >= 0.0, "parameter-error", "sigma must be nonnegative");
    Vector acc = Vector::Zero(image.shape.size());
    for (int k = 0; k < samples; ++k) {
        auto eng = rng::engine(seed, "smoothgrad", static_cast<std::uint64_t>(k));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector jittered = image.data;
        if (sigma > 0.0) {
            for (Eigen::Index i = 0; i < jittered.size(); ++i) jittered[i] += sigma * normal(eng);
        }
        acc += input_gradient_flat(model, jittered, class_index, target);
    }
    acc /= samples;
    return SaliencyMap(image.shape, std::move(acc), MapSource::baseline_method);
}

// Executable axiom verdict for an attribution of a tabulated game:
//   complete allocation  sum(phi) = v(full) - v(empty)
//   no unrelated allocation  null players receive 0 (vacuous if none)
//   symmetry  interchangeable players receive equal values (vacuous if none)
struct AxiomVerdict {
    bool complete_allocation = false;
    double ca_residual = 0.0;
    bool no_unrelated_allocation = false;
    double nua_max = 0.0;
    int null_count = 0;
    bool symmetry = false;
    double symmetry_max = 0.0;
    int symmetric_pair_count = 0;

    bool all_pass() const { return complete_allocation && no_unrelated_allocation && symmetry; }
};

inline AxiomVerdict check_axioms(const TabularGame& game, const Vector& attribution,
                                 double tol = 1e-9) {
    require(static_cast<int>(attribution.size()) == game.n, "shape-mismatch",
            "attribution length does not match player count");
    AxiomVerdict verdict;
    const double v_empty = game.v.front();
    const double v_full = game.v.back();
    verdict.ca_residual = std::abs(attribution.sum() - (v_full - v_empty));
    verdict.complete_allocation = verdict.ca_residual <= tol;

    const auto nulls = null_players(game, tol);
    verdict.null_count = static_cast<int>(nulls.size());
    for (int p : nulls) verdict.nua_max = std::max(verdict.nua_max, std::abs(attribution[p]));
    verdict.no_unrelated_allocation = verdict.nua_max <= tol;

    const auto pairs = symmetric_pairs(game, tol);
    verdict.symmetric_pair_count = static_cast<int>(pairs.size());
    for (const auto& [i, j] : pairs) {
        verdict.symmetry_max =
            std::max(verdict.symmetry_max, std::abs(attribution[i] - attribution[j]));
    }
    verdict.symmetry = verdict.symmetry_max <= tol;
    return verdict;
}

// Residual of the fusion conservation identity under unnormalized fusion:
// total(fused) = alpha * total(manifold) + (1 - alpha) * total(traditional).
inline double fusion_conservation_residual(const SaliencyMap& m_traditional,
                                           const SaliencyMap& m_manifold,
                                           const SaliencyMap& fused_raw, double alpha) {
    const double expected =
        alpha * m_manifold.values.sum() + (1.0 - alpha) * m_traditional.values.sum();
    return std::abs(fused_raw.values.sum() - expected);
}

struct MetricReport {
    std::string method;
    double infidelity = 0.0;
    double sensitivity = 0.0;
    PerturbationSpec perturbation;
    double radius = 0.0;
    int num_probes = 0;
    std::uint64_t seed = 0;
};

}  // namespace fshap
