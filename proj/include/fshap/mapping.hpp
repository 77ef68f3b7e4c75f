#pragma once

#include <cmath>
#include <string>

#include "fshap/codec.hpp"
#include "fshap/error.hpp"
#include "fshap/game.hpp"
#include "fshap/shapley.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

// How a manifold coordinate's Shapley value is spread over pixels. The
// absolute mode uses |J| column weights, a convex combination per
// coordinate, so the map total equals the attribution total exactly and
// degenerates to a uniform 1/(C*W*H) split when |J| is uniform. The signed
// mode keeps the Jacobian's signs; its weights still sum to 1 but may be
// negative, so only the absolute mode guarantees weight validity.
enum class RedistributionWeighting { absolute_jacobian, signed_jacobian };

inline SaliencyMap redistribute(const AttributionVector& attr, const Matrix& jac,
                                const Shape& shape,
                                RedistributionWeighting weighting =
                                    RedistributionWeighting::absolute_jacobian) {
    const int n = shape.size();
    const int latent = attr.players();
    require(static_cast<int>(jac.rows()) == n && static_cast<int>(jac.cols()) == latent,
            "shape-mismatch",
            "Jacobian is " + std::to_string(jac.rows()) + "x" + std::to_string(jac.cols()) +
                ", expected " + std::to_string(n) + "x" + std::to_string(latent));
    require(jac.allFinite(), "contract-violation", "Jacobian has non-finite entries");

    Vector pixels = Vector::Zero(n);
    for (int p = 0; p < latent; ++p) {
        const double phi = attr.values[p];
        Vector column = weighting == RedistributionWeighting::absolute_jacobian
                            ? jac.col(p).cwiseAbs()
                            : Vector(jac.col(p));
        const double denom = column.sum();
        if (std::abs(denom) < 1e-12) {
            if (phi == 0.0) continue;  // dead coordinate with nothing to place
            throw Error("dead-coordinate",
                        "coordinate " + std::to_string(p) + " has vanishing Jacobian support "
                        "but a nonzero Shapley value " + std::to_string(phi));
        }
        pixels += column * (phi / denom);
    }
    return SaliencyMap(shape, std::move(pixels), MapSource::manifold);
}

struct ManifoldSaliencyConfig {
    ManifoldShapConfig shap;
    EstimatorConfig estimator;
    RedistributionWeighting weighting = RedistributionWeighting::absolute_jacobian;
};

// Manifold Shapley redistributed to pixel space through the decoder Jacobian
// evaluated at the encoded point R(I).
inline SaliencyMap manifold_saliency(const BlackBoxModel& model, const ManifoldCodec& codec,
                                     const Image& image, int class_index,
                                     const ManifoldSaliencyConfig& config = {}) {
    AttributionVector attr =
        manifold_shap(model, codec, image, class_index, config.shap, config.estimator);
    Matrix jac = jacobian(codec, encode(codec, image));
    return redistribute(attr, jac, image.shape, config.weighting);
}

}  // namespace fshap
