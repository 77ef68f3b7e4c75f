#pragma once

#include <Eigen/Core>
#include <string>

#include "fshap/error.hpp"

namespace fshap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense C x W x H grid, stored flat in row-major (c, w, h) order:
// flat index = (c * W + w) * H + h.
struct Shape {
    int channels = 0;
    int width = 0;
    int height = 0;

    int size() const { return channels * width * height; }

    int index(int c, int w, int h) const { return (c * width + w) * height + h; }

    bool operator==(const Shape& other) const = default;

    std::string str() const {
        return std::to_string(channels) + "x" + std::to_string(width) + "x" +
               std::to_string(height);
    }
};

inline void check_shape(const Shape& s) {
    require(s.channels >= 1 && s.width >= 1 && s.height >= 1, "shape-mismatch",
            "invalid shape " + s.str());
}

// The sample to be explained. Values are conventionally in [0, 1] but the
// library never clamps; anything downstream of a decoder may leave the range.
struct Image {
    Shape shape;
    Vector data;

    Image() = default;
    Image(Shape s, Vector d) : shape(s), data(std::move(d)) {
        check_shape(shape);
        require(static_cast<int>(data.size()) == shape.size(), "shape-mismatch",
                "image data length " + std::to_string(data.size()) +
                    " does not match shape " + shape.str());
    }

    static Image zeros(Shape s) {
        check_shape(s);
        return Image(s, Vector::Zero(s.size()));
    }

    static Image constant(Shape s, double v) {
        check_shape(s);
        return Image(s, Vector::Constant(s.size(), v));
    }

    double operator()(int c, int w, int h) const { return data[shape.index(c, w, h)]; }
    double& operator()(int c, int w, int h) { return data[shape.index(c, w, h)]; }
};

enum class MapSource { traditional, manifold, fused, baseline_method };

inline const char* to_string(MapSource s) {
    switch (s) {
        case MapSource::traditional: return "traditional";
        case MapSource::manifold: return "manifold";
        case MapSource::fused: return "fused";
        case MapSource::baseline_method: return "baseline-method";
    }
    return "unknown";
}

// Per-pixel attribution scores, same layout as Image. `total` is recorded at
// construction so conservation claims can be audited after the fact.
struct SaliencyMap {
    Shape shape;
    Vector values;
    MapSource source = MapSource::baseline_method;
    double total = 0.0;

    SaliencyMap() = default;
    SaliencyMap(Shape s, Vector v, MapSource src)
        : shape(s), values(std::move(v)), source(src) {
        check_shape(shape);
        require(static_cast<int>(values.size()) == shape.size(), "shape-mismatch",
                "saliency length does not match shape " + shape.str());
        total = values.sum();
    }

    double operator()(int c, int w, int h) const { return values[shape.index(c, w, h)]; }
};

inline Image hadamard(const SaliencyMap& mask, const Image& image) {
    require(mask.shape == image.shape, "shape-mismatch",
            "mask shape " + mask.shape.str() + " vs image shape " + image.shape.str());
    return Image(image.shape, mask.values.cwiseProduct(image.data));
}

}  // namespace fshap
