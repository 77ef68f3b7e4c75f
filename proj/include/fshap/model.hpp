#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fshap/error.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

enum class Activation { identity, relu, tanh, softmax_final };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::softmax_final: return "softmax-final";
    }
    return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "softmax-final") return Activation::softmax_final;
    throw Error("format-error", "unknown activation tag '" + s + "'");
}

struct DenseLayer {
    Matrix weights;  // rows = outputs, cols = inputs
    Vector bias;
    Activation activation = Activation::identity;
};

inline Vector softmax(const Vector& z) {
    const double m = z.maxCoeff();
    Vector e = (z.array() - m).exp();
    return e / e.sum();
}

// Feedforward classifier f. The last layer may carry the softmax-final tag,
// in which case forward() returns a probability vector; otherwise the raw
// last-layer output is the confidence vector.
struct BlackBoxModel {
    Shape input_shape;
    std::vector<DenseLayer> layers;

    int num_classes() const {
        return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
    }

    bool has_softmax() const {
        return !layers.empty() && layers.back().activation == Activation::softmax_final;
    }

    void validate() const {
        check_shape(input_shape);
        require(!layers.empty(), "format-error", "model has no layers");
        int in = input_shape.size();
        for (size_t k = 0; k < layers.size(); ++k) {
            const DenseLayer& layer = layers[k];
            require(layer.weights.cols() == in, "format-error",
                    "layer " + std::to_string(k) + " expects input of size " +
                        std::to_string(layer.weights.cols()) + ", got " + std::to_string(in));
            require(layer.bias.size() == layer.weights.rows(), "format-error",
                    "layer " + std::to_string(k) + " bias length mismatch");
            if (layer.activation == Activation::softmax_final) {
                require(k + 1 == layers.size(), "format-error",
                        "softmax-final is only allowed on the last layer");
            }
            in = static_cast<int>(layer.weights.rows());
        }
    }
};

namespace detail {

inline Vector apply_activation(Activation act, const Vector& z) {
    switch (act) {
        case Activation::identity: return z;
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::softmax_final: return softmax(z);
    }
    return z;
}

// Elementwise derivative; softmax is handled separately in the backward pass.
inline Vector activation_derivative(Activation act, const Vector& z) {
    switch (act) {
        case Activation::identity: return Vector::Ones(z.size());
        case Activation::relu: {
            // subgradient 0 at exactly 0
            Vector d(z.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) d[i] = z[i] > 0.0 ? 1.0 : 0.0;
            return d;
        }
        case Activation::tanh: {
            Vector t = z.array().tanh().matrix();
            return (1.0 - t.array().square()).matrix();
        }
        case Activation::softmax_final: break;
    }
    throw Error("configuration-error", "no elementwise derivative for softmax");
}

}  // namespace detail

inline Vector forward_flat(const BlackBoxModel& model, const Vector& x) {
    require(static_cast<int>(x.size()) == model.input_shape.size(), "shape-mismatch",
            "input length " + std::to_string(x.size()) + " does not match model input " +
                model.input_shape.str());
    Vector a = x;
    for (const DenseLayer& layer : model.layers) {
        a = detail::apply_activation(layer.activation, layer.weights * a + layer.bias);
    }
    return a;
}

inline Vector forward(const BlackBoxModel& model, const Image& image) {
    require(image.shape == model.input_shape, "shape-mismatch",
            "image shape " + image.shape.str() + " does not match model input " +
                model.input_shape.str());
    return forward_flat(model, image.data);
}

// Pre-softmax logits (identical to forward() when the model has no softmax).
inline Vector logits_flat(const BlackBoxModel& model, const Vector& x) {
    require(static_cast<int>(x.size()) == model.input_shape.size(), "shape-mismatch",
            "input length does not match model input " + model.input_shape.str());
    Vector a = x;
    for (const DenseLayer& layer : model.layers) {
        Vector z = layer.weights * a + layer.bias;
        a = layer.activation == Activation::softmax_final
                ? z
                : detail::apply_activation(layer.activation, z);
    }
    return a;
}

enum class GradientTarget { confidence, logit };

// d f_t / d input via reverse-mode differentiation through the layer stack.
// `target` picks the softmax output (default, what the metrics operate on)
// or the pre-softmax logit.
inline Vector input_gradient_flat(const BlackBoxModel& model, const Vector& x, int class_index,
                                  GradientTarget target = GradientTarget::confidence) {
    require(static_cast<int>(x.size()) == model.input_shape.size(), "shape-mismatch",
            "input length does not match model input " + model.input_shape.str());
    require(class_index >= 0 && class_index < model.num_classes(), "index-error",
            "class index " + std::to_string(class_index) + " out of range [0, " +
                std::to_string(model.num_classes()) + ")");

    const size_t n_layers = model.layers.size();
    std::vector<Vector> pre(n_layers);   // z_k
    std::vector<Vector> post(n_layers);  // a_k
    Vector a = x;
    for (size_t k = 0; k < n_layers; ++k) {
        pre[k] = model.layers[k].weights * a + model.layers[k].bias;
        post[k] = detail::apply_activation(model.layers[k].activation, pre[k]);
        a = post[k];
    }

    // seed gradient at the last layer's pre-activation
    const DenseLayer& last = model.layers.back();
    Vector g;
    if (last.activation == Activation::softmax_final) {
        if (target == GradientTarget::confidence) {
            const Vector& s = post.back();
            g = -s[class_index] * s;
            g[class_index] += s[class_index];
        } else {
            g = Vector::Zero(pre.back().size());
            g[class_index] = 1.0;
        }
    } else {
        Vector unit = Vector::Zero(pre.back().size());
        unit[class_index] = 1.0;
        g = target == GradientTarget::logit
                ? unit
                : unit.cwiseProduct(detail::activation_derivative(last.activation, pre.back()));
    }

    for (size_t k = n_layers; k-- > 0;) {
        if (k + 1 < n_layers) {
            // g currently holds d/d post[k]; push through activation k
            g = g.cwiseProduct(detail::activation_derivative(model.layers[k].activation, pre[k]));
        }
        g = model.layers[k].weights.transpose() * g;
    }
    return g;
}

inline SaliencyMap input_gradient(const BlackBoxModel& model, const Image& image, int class_index,
                                  GradientTarget target = GradientTarget::confidence) {
    require(image.shape == model.input_shape, "shape-mismatch",
            "image shape " + image.shape.str() + " does not match model input " +
                model.input_shape.str());
    return SaliencyMap(image.shape, input_gradient_flat(model, image.data, class_index, target),
                       MapSource::baseline_method);
}

}  // namespace fshap
