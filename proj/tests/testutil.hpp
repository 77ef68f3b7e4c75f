#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fshap/error.hpp"
#include "fshap/model.hpp"
#include "fshap/tensor.hpp"

namespace testutil {

// Asserts that fn throws fshap::Error with the given code.
template <typename Fn>
void expect_error_code(const char* code, Fn&& fn) {
    try {
        fn();
        FAIL() << "expected error code '" << code << "', nothing was thrown";
    } catch (const fshap::Error& e) {
        EXPECT_EQ(e.code(), code) << "message: " << e.what();
    } catch (const std::exception& e) {
        FAIL() << "expected fshap::Error, got: " << e.what();
    }
}

inline fshap::Vector random_vector(std::mt19937_64& eng, int n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    fshap::Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(eng);
    return v;
}

inline fshap::Matrix random_matrix(std::mt19937_64& eng, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    fshap::Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = normal(eng);
    }
    return m;
}

inline fshap::Image random_image(std::uint64_t seed, fshap::Shape shape) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    fshap::Vector data(shape.size());
    for (int i = 0; i < shape.size(); ++i) data[i] = unit(eng);
    return fshap::Image(shape, std::move(data));
}

// Random feedforward model: hidden widths with the given activation, then a
// linear class head, optionally softmaxed. Weights are scaled down so
// softmax never saturates and finite differences stay well-conditioned.
inline fshap::BlackBoxModel random_model(std::uint64_t seed, fshap::Shape shape,
                                         const std::vector<int>& hidden, int classes,
                                         fshap::Activation hidden_act = fshap::Activation::relu,
                                         bool softmax = true) {
    std::mt19937_64 eng(seed);
    fshap::BlackBoxModel model;
    model.input_shape = shape;
    int in = shape.size();
    for (int width : hidden) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        model.layers.push_back(fshap::DenseLayer{random_matrix(eng, width, in, scale),
                                                 random_vector(eng, width, 0.1), hidden_act});
        in = width;
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    model.layers.push_back(fshap::DenseLayer{
        random_matrix(eng, classes, in, scale), random_vector(eng, classes, 0.1),
        softmax ? fshap::Activation::softmax_final : fshap::Activation::identity});
    model.validate();
    return model;
}

inline std::vector<double> to_std(const fshap::Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline fshap::Vector from_std(const std::vector<double>& v) {
    fshap::Vector out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

// Fresh scratch directory under the build tree, cleaned on construction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("fshap_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
