#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fshap/codec.hpp"
#include "fshap/error.hpp"
#include "fshap/game.hpp"
#include "fshap/model.hpp"
#include "fshap/rng.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

enum class Imputation { baseline, empirical };

// How coalitions are turned into Shapley estimates. Exact enumeration is
// used up to exact_max_players (or always when force_sampled is off and the
// game is small); larger games fall back to permutation sampling.
struct EstimatorConfig {
    int exact_max_players = kExactPlayerLimit;
    int num_permutations = 2000;
    std::uint64_t seed = 0;
    bool force_sampled = false;
};

template <typename Game>
AttributionVector run_estimator(int n, Game&& game, const EstimatorConfig& est) {
    if (!est.force_sampled && n <= std::min(est.exact_max_players, kExactPlayerLimit)) {
        return shapley_exact_fn(n, game);
    }
    return shapley_sampled_fn(n, game, est.num_permutations, est.seed);
}

// Value function over manifold coordinates: members of the coalition keep
// the instance's code entries, non-members are imputed from the baseline
// code or from seeded draws out of an empirical pool (one pooled code per
// draw, so coordinate dependence in the pool is respected).
struct ManifoldValueFunction {
    const BlackBoxModel* model = nullptr;
    const ManifoldCodec* codec = nullptr;
    int class_index = 0;
    Imputation imputation = Imputation::baseline;
    Vector baseline_code;  // empty means the zero code (the dataset mean image)
    std::vector<Vector> empirical_pool;
    int mc_samples = 8;
    std::uint64_t seed = 0;

    int players() const { return codec->latent_dim; }

    Vector resolved_baseline() const {
        return baseline_code.size() == 0 ? Vector::Zero(codec->latent_dim) : baseline_code;
    }

    void validate() const {
        require(model != nullptr && codec != nullptr, "configuration-error",
                "manifold value function needs a model and a codec");
        require(class_index >= 0 && class_index < model->num_classes(), "index-error",
                "class index out of range");
        if (baseline_code.size() != 0) {
            require(static_cast<int>(baseline_code.size()) == codec->latent_dim,
                    "shape-mismatch", "baseline code length != latent_dim");
        }
        if (imputation == Imputation::empirical) {
            require(!empirical_pool.empty(), "configuration-error",
                    "empirical imputation requires a non-empty pool");
            require(mc_samples >= 1, "parameter-error", "mc_samples must be >= 1");
        }
    }
};

inline double value(const ManifoldValueFunction& vf, Coalition coalition,
                    const Vector& instance_code) {
    vf.validate();
    const int n = vf.players();
    require(static_cast<int>(instance_code.size()) == n, "shape-mismatch",
            "instance code length != latent_dim");
    require((coalition.mask >> n) == 0, "index-error", "coalition has out-of-range members");

    auto evaluate = [&](const Vector& code) {
        return forward_flat(*vf.model, decode(*vf.codec, code).data)[vf.class_index];
    };

    if (coalition.mask == Coalition::full(n).mask) return evaluate(instance_code);

    if (vf.imputation == Imputation::baseline) {
        Vector base = vf.resolved_baseline();
        Vector code(n);
        for (int p = 0; p < n; ++p) code[p] = coalition.contains(p) ? instance_code[p] : base[p];
        return evaluate(code);
    }

    // empirical: substream keyed by the coalition so value() is a pure
    // function of (config, seed, coalition) regardless of evaluation order
    auto eng = rng::engine(vf.seed, "imputation", coalition.mask);
    std::uniform_int_distribution<std::size_t> pick(0, vf.empirical_pool.size() - 1);
    double acc = 0.0;
    Vector code(n);
    for (int d = 0; d < vf.mc_samples; ++d) {
        const Vector& pooled = vf.empirical_pool[pick(eng)];
        for (int p = 0; p < n; ++p) code[p] = coalition.contains(p) ? instance_code[p] : pooled[p];
        acc += evaluate(code);
    }
    return acc / vf.mc_samples;
}

// Value function over rectangular pixel groups spanning all channels:
// member groups keep instance pixels, non-member groups take the baseline
// image's pixels (the feature-independence assumption of traditional Shap).
struct PixelGroupValueFunction {
    const BlackBoxModel* model = nullptr;
    int class_index = 0;
    int grid_w = 1;
    int grid_h = 1;
    Image baseline_image;

    int players() const { return grid_w * grid_h; }

    void validate(const Shape& shape) const {
        require(model != nullptr, "configuration-error", "pixel value function needs a model");
        require(class_index >= 0 && class_index < model->num_classes(), "index-error",
                "class index out of range");
        require(grid_w >= 1 && grid_h >= 1, "configuration-error", "grid must be at least 1x1");
        require(grid_w <= shape.width && grid_h <= shape.height, "configuration-error",
                "grid " + std::to_string(grid_w) + "x" + std::to_string(grid_h) +
                    " is larger than the image " + shape.str());
        require(baseline_image.shape == shape, "shape-mismatch",
                "baseline image shape does not match");
    }

    // Group g = wa * grid_h + hb covers w in [wa*bw, ...) and h in [hb*bh, ...),
    // remainder pixels joining the last block along each axis.
    int group_of(const Shape& shape, int w, int h) const {
        const int bw = shape.width / grid_w;
        const int bh = shape.height / grid_h;
        const int wa = std::min(w / bw, grid_w - 1);
        const int hb = std::min(h / bh, grid_h - 1);
        return wa * grid_h + hb;
    }
};

inline double value(const PixelGroupValueFunction& vf, Coalition coalition,
                    const Image& instance) {
    vf.validate(instance.shape);
    const int n = vf.players();
    require((coalition.mask >> n) == 0, "index-error", "coalition has out-of-range members");

    if (coalition.mask == Coalition::full(n).mask) {
        return forward(*vf.model, instance)[vf.class_index];
    }
    Image composed = vf.baseline_image;
    const Shape& shape = instance.shape;
    for (int w = 0; w < shape.width; ++w) {
        for (int h = 0; h < shape.height; ++h) {
            if (!coalition.contains(vf.group_of(shape, w, h))) continue;
            for (int c = 0; c < shape.channels; ++c) {
                composed(c, w, h) = instance(c, w, h);
            }
        }
    }
    return forward(*vf.model, composed)[vf.class_index];
}

// Traditional (feature-independent) pixel-group Shapley. The per-group value
// is broadcast uniformly over the group's pixels, divided by the group's
// pixel count, so the map sums to v_full - v_empty.
inline SaliencyMap traditional_shap(const BlackBoxModel& model, const Image& image,
                                    int class_index, int grid_w, int grid_h,
                                    const Image& baseline_image, const EstimatorConfig& est = {}) {
    PixelGroupValueFunction vf;
    vf.model = &model;
    vf.class_index = class_index;
    vf.grid_w = grid_w;
    vf.grid_h = grid_h;
    vf.baseline_image = baseline_image;
    vf.validate(image.shape);

    const int n = vf.players();
    AttributionVector attr =
        run_estimator(n, [&](std::uint32_t mask) { return value(vf, Coalition{mask}, image); },
                      est);

    const Shape& shape = image.shape;
    std::vector<int> group_pixels(n, 0);
    for (int w = 0; w < shape.width; ++w) {
        for (int h = 0; h < shape.height; ++h) {
            group_pixels[vf.group_of(shape, w, h)] += shape.channels;
        }
    }
    Vector values = Vector::Zero(shape.size());
    for (int c = 0; c < shape.channels; ++c) {
        for (int w = 0; w < shape.width; ++w) {
            for (int h = 0; h < shape.height; ++h) {
                const int g = vf.group_of(shape, w, h);
                values[shape.index(c, w, h)] = attr.values[g] / group_pixels[g];
            }
        }
    }
    return SaliencyMap(shape, std::move(values), MapSource::traditional);
}

struct ManifoldShapConfig {
    Imputation imputation = Imputation::baseline;
    Vector baseline_code;
    std::vector<Vector> empirical_pool;
    int mc_samples = 8;
    std::uint64_t seed = 0;
};

// Shapley values over the L manifold coordinates of the encoded image. The
// explained image is replaced by its reconstruction G(R(I)) inside the game;
// the residual's attribution is carried by the traditional term in a fusion.
inline AttributionVector manifold_shap(const BlackBoxModel& model, const ManifoldCodec& codec,
                                       const Image& image, int class_index,
                                       const ManifoldShapConfig& config = {},
                                       const EstimatorConfig& est = {}) {
    require(image.shape == codec.image_shape, "shape-mismatch",
            "image shape does not match codec");
    ManifoldValueFunction vf;
    vf.model = &model;
    vf.codec = &codec;
    vf.class_index = class_index;
    vf.imputation = config.imputation;
    vf.baseline_code = config.baseline_code;
    vf.empirical_pool = config.empirical_pool;
    vf.mc_samples = config.mc_samples;
    vf.seed = config.seed;
    vf.validate();

    const Vector instance_code = encode(codec, image);
    return run_estimator(
        codec.latent_dim,
        [&](std::uint32_t mask) { return value(vf, Coalition{mask}, instance_code); }, est);
}

}  // namespace fshap
