#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fshap/codec.hpp"
#include "fshap/error.hpp"
#include "fshap/model.hpp"
#include "fshap/tensor.hpp"

namespace fshap::io {

using nlohmann::json;

// Doubles are printed with 17 significant digits so rewriting an artifact
// from the same inputs is byte-identical and round-trips exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view token, const std::string& context) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    require(ec == std::errc() && ptr == last, "format-error",
            context + ": cannot parse '" + std::string(token) + "' as a number");
    return value;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io-error", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io-error", "cannot write '" + path + "'");
    out << content;
}

namespace detail {

inline json parse_json(const std::string& text, const std::string& path) {
    json j = json::parse(text, nullptr, false);
    require(!j.is_discarded(), "format-error", "'" + path + "' is not valid JSON");
    return j;
}

inline Shape shape_from_json(const json& j, const std::string& field) {
    require(j.is_array() && j.size() == 3, "format-error",
            field + " must be a [C, W, H] array");
    for (const auto& e : j) {
        require(e.is_number_integer() && e.get<int>() >= 1, "format-error",
                field + " entries must be positive integers");
    }
    return Shape{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

inline DenseLayer layer_from_json(const json& j, const std::string& field) {
    require(j.is_object(), "format-error", field + " must be an object");
    require(j.contains("weights") && j["weights"].is_array() && !j["weights"].empty(),
            "format-error", field + ".weights must be a non-empty 2d array");
    require(j.contains("bias") && j["bias"].is_array(), "format-error",
            field + ".bias must be an array");
    require(j.contains("activation") && j["activation"].is_string(), "format-error",
            field + ".activation must be a string");

    const auto& rows = j["weights"];
    const size_t n_rows = rows.size();
    require(rows[0].is_array() && !rows[0].empty(), "format-error",
            field + ".weights rows must be non-empty arrays");
    const size_t n_cols = rows[0].size();
    Matrix w(n_rows, n_cols);
    for (size_t r = 0; r < n_rows; ++r) {
        require(rows[r].is_array() && rows[r].size() == n_cols, "format-error",
                field + ".weights must be rectangular");
        for (size_t c = 0; c < n_cols; ++c) {
            require(rows[r][c].is_number(), "format-error",
                    field + ".weights entries must be numbers");
            w(r, c) = rows[r][c].get<double>();
        }
    }
    require(j["bias"].size() == n_rows, "format-error",
            field + ".bias length must match the weight rows");
    Vector b(n_rows);
    for (size_t r = 0; r < n_rows; ++r) {
        require(j["bias"][r].is_number(), "format-error", field + ".bias entries must be numbers");
        b[r] = j["bias"][r].get<double>();
    }
    Activation act;
    try {
        act = activation_from_string(j["activation"].get<std::string>());
    } catch (const Error& e) {
        throw Error("format-error", field + ".activation: " + e.what());
    }
    return DenseLayer{std::move(w), std::move(b), act};
}

inline json layer_to_json(const DenseLayer& layer) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row.push_back(layer.weights(r, c));
        rows.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) bias.push_back(layer.bias[r]);
    return json{{"weights", std::move(rows)},
                {"bias", std::move(bias)},
                {"activation", to_string(layer.activation)}};
}

inline std::vector<DenseLayer> layers_from_json(const json& j, const std::string& field) {
    require(j.is_array() && !j.empty(), "format-error", field + " must be a non-empty array");
    std::vector<DenseLayer> layers;
    layers.reserve(j.size());
    for (size_t k = 0; k < j.size(); ++k) {
        layers.push_back(layer_from_json(j[k], field + "[" + std::to_string(k) + "]"));
    }
    return layers;
}

}  // namespace detail

inline BlackBoxModel load_model(const std::string& path) {
    json j = detail::parse_json(read_file(path), path);
    require(j.is_object(), "format-error", path + ": model file must be a JSON object");
    require(j.contains("input_shape"), "format-error", path + ": missing field input_shape");
    require(j.contains("layers"), "format-error", path + ": missing field layers");
    BlackBoxModel model;
    model.input_shape = detail::shape_from_json(j["input_shape"], "input_shape");
    model.layers = detail::layers_from_json(j["layers"], "layers");
    try {
        model.validate();
    } catch (const Error& e) {
        throw Error("format-error", path + ": " + e.what());
    }
    return model;
}

inline void save_model(const BlackBoxModel& model, const std::string& path) {
    model.validate();
    json j;
    j["input_shape"] = {model.input_shape.channels, model.input_shape.width,
                        model.input_shape.height};
    j["layers"] = json::array();
    for (const DenseLayer& layer : model.layers) j["layers"].push_back(detail::layer_to_json(layer));
    write_file(path, j.dump(2) + "\n");
}

inline ManifoldCodec load_codec(const std::string& path) {
    json j = detail::parse_json(read_file(path), path);
    require(j.is_object(), "format-error", path + ": codec file must be a JSON object");
    for (const char* field : {"kind", "input_shape", "latent_dim", "mean_image", "decoder",
                              "encoder", "round_trip_rmse"}) {
        require(j.contains(field), "format-error",
                path + ": missing field " + std::string(field));
    }
    ManifoldCodec codec;
    const std::string kind = j["kind"].get<std::string>();
    require(kind == "linear" || kind == "layered", "format-error",
            path + ": kind must be 'linear' or 'layered'");
    codec.kind = kind == "linear" ? CodecKind::linear : CodecKind::layered;
    codec.image_shape = detail::shape_from_json(j["input_shape"], "input_shape");
    require(j["latent_dim"].is_number_integer() && j["latent_dim"].get<int>() >= 1,
            "format-error", path + ": latent_dim must be a positive integer");
    codec.latent_dim = j["latent_dim"].get<int>();
    require(j["mean_image"].is_array() &&
                static_cast<int>(j["mean_image"].size()) == codec.image_shape.size(),
            "format-error", path + ": mean_image length must equal C*W*H");
    codec.mean_image = Vector(codec.image_shape.size());
    for (int i = 0; i < codec.image_shape.size(); ++i) {
        require(j["mean_image"][i].is_number(), "format-error",
                path + ": mean_image entries must be numbers");
        codec.mean_image[i] = j["mean_image"][i].get<double>();
    }
    require(j["decoder"].is_object() && j["decoder"].contains("layers"), "format-error",
            path + ": decoder.layers missing");
    require(j["encoder"].is_object() && j["encoder"].contains("layers"), "format-error",
            path + ": encoder.layers missing");
    codec.decoder_layers = detail::layers_from_json(j["decoder"]["layers"], "decoder.layers");
    codec.encoder_layers = detail::layers_from_json(j["encoder"]["layers"], "encoder.layers");
    require(j["round_trip_rmse"].is_number(), "format-error",
            path + ": round_trip_rmse must be a number");
    codec.round_trip_rmse = j["round_trip_rmse"].get<double>();
    try {
        codec.validate();
    } catch (const Error& e) {
        throw Error("format-error", path + ": " + e.what());
    }
    return codec;
}

inline void save_codec(const ManifoldCodec& codec, const std::string& path) {
    codec.validate();
    json j;
    j["kind"] = to_string(codec.kind);
    j["input_shape"] = {codec.image_shape.channels, codec.image_shape.width,
                        codec.image_shape.height};
    j["latent_dim"] = codec.latent_dim;
    j["mean_image"] = json::array();
    for (Eigen::Index i = 0; i < codec.mean_image.size(); ++i) {
        j["mean_image"].push_back(codec.mean_image[i]);
    }
    j["round_trip_rmse"] = codec.round_trip_rmse;
    j["decoder"]["layers"] = json::array();
    for (const DenseLayer& l : codec.decoder_layers) {
        j["decoder"]["layers"].push_back(detail::layer_to_json(l));
    }
    j["encoder"]["layers"] = json::array();
    for (const DenseLayer& l : codec.encoder_layers) {
        j["encoder"]["layers"].push_back(detail::layer_to_json(l));
    }
    write_file(path, j.dump(2) + "\n");
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

// First line of every CSV artifact: "# shape,C,W,H".
inline Shape parse_shape_header(std::string_view line, const std::string& path) {
    auto fields = split(trim(line), ',');
    require(fields.size() == 4 && trim(fields[0]) == "# shape", "format-error",
            path + ": first line must be '# shape,C,W,H'");
    int dims[3];
    for (int i = 0; i < 3; ++i) {
        dims[i] = static_cast<int>(parse_double(trim(fields[i + 1]), path + ": shape header"));
        require(dims[i] >= 1, "format-error", path + ": shape entries must be >= 1");
    }
    return Shape{dims[0], dims[1], dims[2]};
}

}  // namespace detail

// Image-set CSV: "# shape,C,W,H" then one image per line, C*W*H values in
// row-major (c, w, h) order.
inline std::vector<Image> load_image_set_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "format-error", path + ": file is empty");
    const Shape shape = detail::parse_shape_header(line, path);
    std::vector<Image> images;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        auto fields = detail::split(trimmed, ',');
        require(static_cast<int>(fields.size()) == shape.size(), "format-error",
                path + ": line " + std::to_string(line_no) + " has " +
                    std::to_string(fields.size()) + " values, expected " +
                    std::to_string(shape.size()));
        Vector data(shape.size());
        for (int i = 0; i < shape.size(); ++i) {
            data[i] = parse_double(detail::trim(fields[i]),
                                   path + ": line " + std::to_string(line_no));
        }
        images.emplace_back(shape, std::move(data));
    }
    require(!images.empty(), "format-error", path + ": no image rows");
    return images;
}

inline void save_image_set_csv(const std::vector<Image>& images, const std::string& path) {
    require(!images.empty(), "parameter-error", "image set is empty");
    const Shape shape = images.front().shape;
    std::ostringstream out;
    out << "# shape," << shape.channels << "," << shape.width << "," << shape.height << "\n";
    for (const Image& img : images) {
        require(img.shape == shape, "shape-mismatch", "image set has mixed shapes");
        for (int i = 0; i < shape.size(); ++i) {
            if (i) out << ",";
            out << format_double(img.data[i]);
        }
        out << "\n";
    }
    write_file(path, out.str());
}

inline Image load_image_csv(const std::string& path) {
    auto images = load_image_set_csv(path);
    require(images.size() == 1, "format-error",
            path + ": expected exactly one image row, found " + std::to_string(images.size()));
    return images.front();
}

// PGM (P2 or P5), single channel, values scaled to [0, 1] by maxval.
inline Image load_pgm(const std::string& path) {
    const std::string raw = read_file(path);
    std::istringstream in(raw);
    std::string magic;
    in >> magic;
    require(magic == "P5" || magic == "P2", "format-error", path + ": not a P2/P5 PGM file");
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw Error("format-error", path + ": truncated PGM header");
    };
    const int width = std::stoi(next_token());
    const int height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    require(width >= 1 && height >= 1, "format-error", path + ": bad PGM dimensions");
    require(maxval >= 1 && maxval <= 255, "format-error", path + ": only 8-bit PGM supported");

    Shape shape{1, width, height};
    Vector data(shape.size());
    if (magic == "P2") {
        for (int h = 0; h < height; ++h) {
            for (int w = 0; w < width; ++w) {
                data[shape.index(0, w, h)] = std::stoi(next_token()) / static_cast<double>(maxval);
            }
        }
    } else {
        const std::streamoff offset = in.tellg() + std::streamoff(1);
        require(raw.size() >= static_cast<size_t>(offset) + static_cast<size_t>(width) * height,
                "format-error", path + ": truncated PGM payload");
        for (int h = 0; h < height; ++h) {
            for (int w = 0; w < width; ++w) {
                const unsigned char byte = raw[offset + static_cast<size_t>(h) * width + w];
                data[shape.index(0, w, h)] = byte / static_cast<double>(maxval);
            }
        }
    }
    return Image(shape, std::move(data));
}

// Saliency CSV: shape header, a column header, then one row per pixel in
// row-major (c, w, h) order.
inline void save_saliency_csv(const SaliencyMap& map, const std::string& path) {
    const Shape& shape = map.shape;
    std::ostringstream out;
    out << "# shape," << shape.channels << "," << shape.width << "," << shape.height << "\n";
    out << "c,w,h,value\n";
    for (int c = 0; c < shape.channels; ++c) {
        for (int w = 0; w < shape.width; ++w) {
            for (int h = 0; h < shape.height; ++h) {
                out << c << "," << w << "," << h << ","
                    << format_double(map.values[shape.index(c, w, h)]) << "\n";
            }
        }
    }
    write_file(path, out.str());
}

// 8-bit grayscale P5 heatmap, min-max scaled over the map's own range.
// Multi-channel maps are rendered as the channel mean. Constant maps render
// mid-gray. PGM raster rows run over h, columns over w.
inline void save_heatmap_pgm(const SaliencyMap& map, const std::string& path) {
    const Shape& shape = map.shape;
    Matrix mono = Matrix::Zero(shape.width, shape.height);
    for (int c = 0; c < shape.channels; ++c) {
        for (int w = 0; w < shape.width; ++w) {
            for (int h = 0; h < shape.height; ++h) {
                mono(w, h) += map.values[shape.index(c, w, h)] / shape.channels;
            }
        }
    }
    const double lo = mono.minCoeff();
    const double hi = mono.maxCoeff();
    std::string payload;
    payload.reserve(static_cast<size_t>(shape.width) * shape.height);
    for (int h = 0; h < shape.height; ++h) {
        for (int w = 0; w < shape.width; ++w) {
            int level = 128;
            if (hi > lo) {
                level = static_cast<int>(std::lround((mono(w, h) - lo) / (hi - lo) * 255.0));
            }
            payload.push_back(static_cast<char>(std::clamp(level, 0, 255)));
        }
    }
    std::ostringstream out;
    out << "P5\n" << shape.width << " " << shape.height << "\n255\n" << payload;
    write_file(path, out.str());
}

}  // namespace fshap::io
