// End-to-end library walkthrough on a synthetic digit-like task: build a
// dataset on a low-dimensional manifold, fit a codec, compare traditional
// and manifold attributions, fuse them, and score the result.

#include <iostream>
#include <random>
#include <vector>

#include "fshap/fshap.hpp"

using namespace fshap;

int main() {
    const Shape shape{1, 6, 6};
    const int n = shape.size();

    // dataset: mean + 4 smooth components with decaying amplitude
    Matrix basis = Matrix::Zero(n, 4);
    for (int i = 0; i < n; ++i) {
        const int w = (i / shape.height) % shape.width;
        const int h = i % shape.height;
        basis(i, 0) = (w < 3) ? 0.5 : -0.5;
        basis(i, 1) = (h < 3) ? 0.5 : -0.5;
        basis(i, 2) = ((w + h) % 2 == 0) ? 0.5 : -0.5;
        basis(i, 3) = (w == h) ? 1.0 : 0.0;
    }
    std::mt19937_64 eng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Image> dataset;
    for (int j = 0; j < 40; ++j) {
        Vector z(4);
        for (int p = 0; p < 4; ++p) z[p] = 0.8 * std::pow(0.6, p) * normal(eng);
        Vector x = Vector::Constant(n, 0.5);
        x += basis * z / std::sqrt(basis.squaredNorm() / 4);
        dataset.push_back(Image(shape, x));
    }
    ManifoldCodec codec = fit_linear_codec(dataset, 4);

    // classifier: relu net that mostly reads the second component
    BlackBoxModel model;
    model.input_shape = shape;
    Matrix w1(8, n);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < n; ++c) w1(r, c) = 0.3 * normal(eng);
    }
    w1.row(0) += 2.0 * codec.basis().col(1).transpose();
    Matrix w2 = Matrix::Zero(2, 8);
    w2(0, 0) = 2.0;
    w2(1, 0) = -2.0;
    model.layers = {DenseLayer{w1, Vector::Zero(8), Activation::relu},
                    DenseLayer{w2, Vector::Zero(2), Activation::softmax_final}};

    const Image& image = dataset.front();
    Vector conf = forward(model, image);
    int top = 0;
    conf.maxCoeff(&top);
    std::cout << "confidence of class " << top << ": " << conf[top] << "\n";

    Image baseline(shape, codec.mean_image);
    SaliencyMap trad = traditional_shap(model, image, top, 3, 3, baseline);
    std::cout << "traditional map total " << trad.total << " vs drop "
              << conf[top] - forward(model, baseline)[top] << "\n";

    ManifoldSaliencyConfig mcfg;
    AttributionVector attr = manifold_shap(model, codec, image, top);
    SaliencyMap mani = manifold_saliency(model, codec, image, top, mcfg);
    std::cout << "manifold coordinate attributions:";
    for (int p = 0; p < attr.players(); ++p) std::cout << " " << attr.values[p];
    std::cout << "\nmanifold map total " << mani.total << " (conserved from "
              << attr.total() << ")\n";

    FusionResult fr = fuse(model, image, trad, mani);
    std::cout << "fusion picked alpha = " << fr.alpha << " with masked-confidence drop "
              << fr.chosen_objective << "\n";

    PerturbationSpec pert;
    pert.num_samples = 128;
    SaliencyMap raw = fuse_maps(trad, mani, fr.alpha, /*normalize=*/false);
    std::cout << "fused infidelity " << infidelity(model, image, raw, pert, top) << "\n";

    io::save_saliency_csv(fr.fused, "demo_out/fused_saliency.csv");
    io::save_heatmap_pgm(fr.fused, "demo_out/fused_heatmap.pgm");
    std::cout << "artifacts in demo_out/\n";
    return 0;
}
