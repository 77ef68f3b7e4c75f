#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <string>
#include <vector>

#include "fshap/error.hpp"
#include "fshap/model.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

enum class CodecKind { linear, layered };

inline const char* to_string(CodecKind k) {
    return k == CodecKind::linear ? "linear" : "layered";
}

// Paired decoder G: U -> I and encoder R: I -> U around a stored mean image.
//   decode(u) = mean + decoder_stack(u)
//   encode(x) = encoder_stack(x - mean)
// The linear kind is a single identity-activation layer on each side whose
// decoder columns are orthonormal; the layered kind stacks affine+tanh maps
// loaded from a codec file. Only identity and tanh activations are allowed,
// so the analytic Jacobian exists everywhere.
struct ManifoldCodec {
    CodecKind kind = CodecKind::linear;
    Shape image_shape;
    int latent_dim = 0;
    Vector mean_image;
    std::vector<DenseLayer> decoder_layers;
    std::vector<DenseLayer> encoder_layers;
    double round_trip_rmse = 0.0;

    const Matrix& basis() const {
        require(kind == CodecKind::linear && decoder_layers.size() == 1, "configuration-error",
                "basis() is only defined for linear codecs");
        return decoder_layers.front().weights;
    }

    void validate() const {
        check_shape(image_shape);
        const int n = image_shape.size();
        require(latent_dim >= 1, "dimension-error", "latent_dim must be >= 1");
        require(static_cast<int>(mean_image.size()) == n, "format-error",
                "mean_image length does not match image shape " + image_shape.str());
        require(!decoder_layers.empty() && !encoder_layers.empty(), "format-error",
                "codec must declare decoder and encoder layers");
        auto check_stack = [](const std::vector<DenseLayer>& stack, int in, int out,
                              const char* name) {
            int d = in;
            for (size_t k = 0; k < stack.size(); ++k) {
                require(stack[k].activation == Activation::identity ||
                            stack[k].activation == Activation::tanh,
                        "format-error",
                        std::string(name) + " layer " + std::to_string(k) +
                            ": codec layers must use identity or tanh");
                require(stack[k].weights.cols() == d, "format-error",
                        std::string(name) + " layer " + std::to_string(k) + " input size " +
                            std::to_string(stack[k].weights.cols()) + " != " + std::to_string(d));
                require(stack[k].bias.size() == stack[k].weights.rows(), "format-error",
                        std::string(name) + " layer " + std::to_string(k) + " bias mismatch");
                d = static_cast<int>(stack[k].weights.rows());
            }
            require(d == out, "format-error",
                    std::string(name) + " output size " + std::to_string(d) +
                        " != " + std::to_string(out));
        };
        check_stack(decoder_layers, latent_dim, n, "decoder");
        check_stack(encoder_layers, n, latent_dim, "encoder");
        if (kind == CodecKind::linear) {
            require(decoder_layers.size() == 1 && encoder_layers.size() == 1, "format-error",
                    "linear codec must have exactly one decoder and one encoder layer");
            const Matrix& d = decoder_layers.front().weights;
            Matrix gram = d.transpose() * d;
            double dev = (gram - Matrix::Identity(latent_dim, latent_dim)).cwiseAbs().maxCoeff();
            require(dev <= 1e-8, "format-error",
                    "linear codec basis is not orthonormal (Gram deviation " +
                        std::to_string(dev) + ")");
        }
    }
};

namespace detail {

inline Vector run_stack(const std::vector<DenseLayer>& stack, const Vector& x) {
    Vector a = x;
    for (const DenseLayer& layer : stack) {
        a = apply_activation(layer.activation, layer.weights * a + layer.bias);
    }
    return a;
}

}  // namespace detail

inline Image decode(const ManifoldCodec& codec, const Vector& code) {
    require(static_cast<int>(code.size()) == codec.latent_dim, "shape-mismatch",
            "code length " + std::to_string(code.size()) + " != latent_dim " +
                std::to_string(codec.latent_dim));
    Vector flat = codec.mean_image + detail::run_stack(codec.decoder_layers, code);
    return Image(codec.image_shape, std::move(flat));
}

inline Vector encode(const ManifoldCodec& codec, const Image& image) {
    require(image.shape == codec.image_shape, "shape-mismatch",
            "image shape " + image.shape.str() + " does not match codec shape " +
                codec.image_shape.str());
    return detail::run_stack(codec.encoder_layers, image.data - codec.mean_image);
}

// d decode_i / d code_p, shape (C*W*H) x L. For a linear codec this is the
// basis matrix independent of the code; for layered codecs it is the
// chain-rule product evaluated at the given code.
inline Matrix jacobian(const ManifoldCodec& codec, const Vector& code) {
    require(static_cast<int>(code.size()) == codec.latent_dim, "shape-mismatch",
            "code length does not match latent_dim");
    if (codec.kind == CodecKind::linear) return codec.basis();

    Matrix jac = Matrix::Identity(codec.latent_dim, codec.latent_dim);
    Vector a = code;
    for (const DenseLayer& layer : codec.decoder_layers) {
        Vector z = layer.weights * a + layer.bias;
        jac = layer.weights * jac;
        if (layer.activation == Activation::tanh) {
            Vector t = z.array().tanh().matrix();
            jac = (1.0 - t.array().square()).matrix().asDiagonal() * jac;
        }
        a = detail::apply_activation(layer.activation, z);
    }
    require(jac.allFinite(), "contract-violation", "codec Jacobian has non-finite entries");
    return jac;
}

// Rank-L truncated principal-subspace codec of the centered dataset. The
// decoder holds the top-L left singular vectors of the centered data matrix;
// encode is the transposed projection. Column signs are canonicalized so a
// refit of the same data reproduces the same codec.
inline ManifoldCodec fit_linear_codec(const std::vector<Image>& dataset, int latent_dim) {
    require(!dataset.empty(), "configuration-error", "dataset is empty");
    const Shape shape = dataset.front().shape;
    const int n = shape.size();
    const int m = static_cast<int>(dataset.size());
    for (const Image& img : dataset) {
        require(img.shape == shape, "shape-mismatch", "dataset images have mixed shapes");
    }
    require(latent_dim >= 1, "dimension-error", "latent_dim must be >= 1");
    require(latent_dim <= std::min(m, n), "dimension-error",
            "latent_dim " + std::to_string(latent_dim) + " exceeds min(dataset size, pixels) = " +
                std::to_string(std::min(m, n)));

    Matrix x(n, m);
    for (int j = 0; j < m; ++j) x.col(j) = dataset[j].data;
    Vector mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;

    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
    const Vector& sigma = svd.singularValues();
    // singular values below the centering noise floor of the raw data do not
    // count as structure, so the threshold takes the larger of the two scales
    const double scale = std::max(sigma.size() > 0 ? sigma[0] : 0.0, x.cwiseAbs().maxCoeff());
    const double tol = std::max(n, m) * std::numeric_limits<double>::epsilon() * scale;
    int rank = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma[i] > tol && sigma[i] > 0.0) ++rank;
    }
    require(latent_dim <= rank, "rank-deficiency",
            "dataset supports rank " + std::to_string(rank) + ", requested latent_dim " +
                std::to_string(latent_dim));

    Matrix basis = svd.matrixU().leftCols(latent_dim);
    for (int p = 0; p < latent_dim; ++p) {
        Eigen::Index pivot;
        basis.col(p).cwiseAbs().maxCoeff(&pivot);
        if (basis(pivot, p) < 0.0) basis.col(p) = -basis.col(p);
    }

    ManifoldCodec codec;
    codec.kind = CodecKind::linear;
    codec.image_shape = shape;
    codec.latent_dim = latent_dim;
    codec.mean_image = mean;
    codec.decoder_layers = {
        DenseLayer{basis, Vector::Zero(n), Activation::identity}};
    codec.encoder_layers = {
        DenseLayer{basis.transpose(), Vector::Zero(latent_dim), Activation::identity}};

    double sq = 0.0;
    for (int j = 0; j < m; ++j) {
        Vector c = centered.col(j);
        Vector resid = c - basis * (basis.transpose() * c);
        sq += resid.squaredNorm();
    }
    codec.round_trip_rmse = std::sqrt(sq / (static_cast<double>(n) * m));
    codec.validate();
    return codec;
}

}  // namespace fshap
