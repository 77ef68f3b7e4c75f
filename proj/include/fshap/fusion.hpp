#pragma once

#include <utility>
#include <vector>

#include "fshap/error.hpp"
#include "fshap/model.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

// Affine min-max rescale to [0, 1]; constant maps become all 0.5.
inline SaliencyMap normalize_map(const SaliencyMap& map) {
    const double lo = map.values.minCoeff();
    const double hi = map.values.maxCoeff();
    Vector out = lo == hi ? Vector::Constant(map.values.size(), 0.5)
                          : Vector(((map.values.array() - lo) / (hi - lo)).matrix());
    return SaliencyMap(map.shape, std::move(out), map.source);
}

// 1 - f(mask (x) I)_{t*} where t* is the top-1 class of the unmasked image.
// With hardmax contributing 1 for t* and 0 elsewhere, the all-class sum of
// hardmax[f(I)_t] - f(mask (x) I)_t reduces to this scalar.
inline double confidence_drop(const BlackBoxModel& model, const Image& image,
                              const SaliencyMap& mask) {
    require(mask.shape == image.shape, "shape-mismatch", "mask shape does not match image");
    const double lo = mask.values.minCoeff();
    const double hi = mask.values.maxCoeff();
    require(lo >= -1e-12 && hi <= 1.0 + 1e-12, "contract-violation",
            "mask entries must lie in [0, 1]");
    Vector base = forward(model, image);
    int top;
    base.maxCoeff(&top);
    return 1.0 - forward(model, hadamard(mask, image))[top];
}

// Pointwise convex combination alpha * manifold + (1 - alpha) * traditional.
// With normalize=true both maps are min-max rescaled first (the published
// artifact); with normalize=false raw attributions are combined, preserving
// the total alpha * sum(manifold) + (1 - alpha) * sum(traditional).
inline SaliencyMap fuse_maps(const SaliencyMap& m_traditional, const SaliencyMap& m_manifold,
                             double alpha, bool normalize = true) {
    require(m_traditional.shape == m_manifold.shape, "shape-mismatch",
            "maps have different shapes");
    require(alpha >= 0.0 && alpha <= 1.0, "parameter-error", "alpha must lie in [0, 1]");
    Vector vt = normalize ? normalize_map(m_traditional).values : m_traditional.values;
    Vector vm = normalize ? normalize_map(m_manifold).values : m_manifold.values;
    Vector fusedv = alpha * vm + (1.0 - alpha) * vt;
    return SaliencyMap(m_traditional.shape, std::move(fusedv), MapSource::fused);
}

struct FusionResult {
    double alpha = 0.0;
    SaliencyMap fused;
    std::vector<std::pair<double, double>> objective_curve;  // (alpha, objective)
    double chosen_objective = 0.0;
};

// Grid search for the fusion coefficient minimizing the confidence drop of
// the masked image. Maps are min-max normalized so alpha is scale-free; the
// grid covers alpha in {0, 1/(g-1), ..., 1}; ties break to the smallest
// alpha. The full objective curve is recorded.
inline FusionResult fuse(const BlackBoxModel& model, const Image& image,
                         const SaliencyMap& m_traditional, const SaliencyMap& m_manifold,
                         int grid_steps = 101) {
    require(grid_steps >= 2, "parameter-error", "grid_steps must be >= 2");
    require(m_traditional.shape == image.shape && m_manifold.shape == image.shape,
            "shape-mismatch", "maps must share the image's shape");

    const SaliencyMap norm_t = normalize_map(m_traditional);
    const SaliencyMap norm_m = normalize_map(m_manifold);

    FusionResult result;
    result.objective_curve.reserve(grid_steps);
    int best = 0;
    for (int k = 0; k < grid_steps; ++k) {
        const double alpha = static_cast<double>(k) / (grid_steps - 1);
        Vector blend = alpha * norm_m.values + (1.0 - alpha) * norm_t.values;
        SaliencyMap mask(image.shape, std::move(blend), MapSource::fused);
        const double objective = confidence_drop(model, image, mask);
        result.objective_curve.emplace_back(alpha, objective);
        if (objective < result.objective_curve[best].second) best = k;
    }
    result.alpha = result.objective_curve[best].first;
    result.chosen_objective = result.objective_curve[best].second;
    Vector blend = result.alpha * norm_m.values + (1.0 - result.alpha) * norm_t.values;
    result.fused = SaliencyMap(image.shape, std::move(blend), MapSource::fused);
    return result;
}

}  // namespace fshap
