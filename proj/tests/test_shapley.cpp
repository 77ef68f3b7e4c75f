#include <gtest/gtest.h>

#include <random>

#include "fshap/shapley.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace fshap;

namespace {

std::vector<Image> manifold_dataset(std::uint64_t seed, Shape shape, int rank, int count) {
    std::mt19937_64 eng(seed);
    Matrix dirs = testutil::random_matrix(eng, shape.size(), rank);
    Vector mean = testutil::random_vector(eng, shape.size(), 0.3);
    std::vector<Image> out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int j = 0; j < count; ++j) {
        Vector coeff(rank);
        for (int p = 0; p < rank; ++p) coeff[p] = normal(eng);
        out.emplace_back(shape, Vector(mean + dirs * coeff));
    }
    return out;
}

struct ManifoldSetup {
    BlackBoxModel model;
    ManifoldCodec codec;
    Image image;
};

ManifoldSetup make_setup(std::uint64_t seed, int latent) {
    const Shape shape{1, 3, 3};
    ManifoldSetup s{testutil::random_model(seed, shape, {6}, 3, Activation::tanh, true),
                    fit_linear_codec(manifold_dataset(seed + 1, shape, latent + 2, 25), latent),
                    testutil::random_image(seed + 2, shape)};
    return s;
}

}  // namespace

TEST(ManifoldValue, FullCoalitionIsTheModelConfidenceOfTheReconstruction) {
    ManifoldSetup s = make_setup(60, 4);
    ManifoldValueFunction vf;
    vf.model = &s.model;
    vf.codec = &s.codec;
    vf.class_index = 1;
    Vector code = encode(s.codec, s.image);
    const double got = value(vf, Coalition::full(4), code);
    const double want = forward(s.model, decode(s.codec, code))[1];
    EXPECT_DOUBLE_EQ(got, want);
}

TEST(ManifoldValue, EmptyCoalitionWithBaselineIsTheBaselineConfidence) {
    ManifoldSetup s = make_setup(61, 3);
    ManifoldValueFunction vf;
    vf.model = &s.model;
    vf.codec = &s.codec;
    vf.class_index = 0;
    std::mt19937_64 eng(5);
    vf.baseline_code = testutil::random_vector(eng, 3);
    const double got = value(vf, Coalition::empty(), encode(s.codec, s.image));
    const double want = forward(s.model, decode(s.codec, vf.baseline_code))[0];
    EXPECT_DOUBLE_EQ(got, want);
}

TEST(ManifoldValue, EmptyBaselineCodeMeansZeroCode) {
    ManifoldSetup s = make_setup(62, 3);
    ManifoldValueFunction vf;
    vf.model = &s.model;
    vf.codec = &s.codec;
    const double got = value(vf, Coalition::empty(), encode(s.codec, s.image));
    const double want = forward(s.model, decode(s.codec, Vector::Zero(3)))[0];
    EXPECT_DOUBLE_EQ(got, want);
}

TEST(ManifoldValue, SingletonEmpiricalPoolEqualsBaselineImputation) {
    ManifoldSetup s = make_setup(63, 3);
    std::mt19937_64 eng(9);
    Vector pooled = testutil::random_vector(eng, 3);

    ManifoldValueFunction empirical;
    empirical.model = &s.model;
    empirical.codec = &s.codec;
    empirical.imputation = Imputation::empirical;
    empirical.empirical_pool = {pooled};
    empirical.mc_samples = 4;

    ManifoldValueFunction baseline;
    baseline.model = &s.model;
    baseline.codec = &s.codec;
    baseline.baseline_code = pooled;

    Vector code = encode(s.codec, s.image);
    for (std::uint32_t mask = 0; mask < 8; ++mask) {
        EXPECT_NEAR(value(empirical, Coalition{mask}, code),
                    value(baseline, Coalition{mask}, code), 1e-12);
    }
}

TEST(ManifoldValue, EmpiricalImputationIsAPureFunctionOfTheCoalition) {
    ManifoldSetup s = make_setup(64, 3);
    ManifoldValueFunction vf;
    vf.model = &s.model;
    vf.codec = &s.codec;
    vf.imputation = Imputation::empirical;
    std::mt19937_64 eng(77);
    for (int k = 0; k < 6; ++k) vf.empirical_pool.push_back(testutil::random_vector(eng, 3));
    vf.mc_samples = 16;
    vf.seed = 5;

    Vector code = encode(s.codec, s.image);
    // same coalition queried at different times gives the same value
    const double first = value(vf, Coalition::of({1}), code);
    value(vf, Coalition::of({0, 2}), code);
    value(vf, Coalition::empty(), code);
    EXPECT_DOUBLE_EQ(value(vf, Coalition::of({1}), code), first);
    // a different seed moves it
    vf.seed = 6;
    EXPECT_NE(value(vf, Coalition::of({1}), code), first);
}

TEST(ManifoldValue, EmptyPoolIsRejected) {
    ManifoldSetup s = make_setup(65, 2);
    ManifoldValueFunction vf;
    vf.model = &s.model;
    vf.codec = &s.codec;
    vf.imputation = Imputation::empirical;
    testutil::expect_error_code("configuration-error", [&] {
        value(vf, Coalition::empty(), Vector::Zero(2));
    });
}

TEST(PixelValue, FullCoalitionIsTheInstanceConfidence) {
    const Shape shape{1, 4, 4};
    BlackBoxModel model = testutil::random_model(70, shape, {5}, 2, Activation::relu, true);
    Image image = testutil::random_image(71, shape);
    PixelGroupValueFunction vf;
    vf.model = &model;
    vf.class_index = 1;
    vf.grid_w = 2;
    vf.grid_h = 2;
    vf.baseline_image = Image::zeros(shape);
    EXPECT_DOUBLE_EQ(value(vf, Coalition::full(4), image), forward(model, image)[1]);
    EXPECT_DOUBLE_EQ(value(vf, Coalition::empty(), image),
                     forward(model, vf.baseline_image)[1]);
}

TEST(PixelValue, RemainderPixelsJoinTheLastBlock) {
    const Shape shape{1, 5, 5};  // 5 not divisible by 2: block edges at 2, remainder to last
    PixelGroupValueFunction vf;
    vf.grid_w = 2;
    vf.grid_h = 2;
    EXPECT_EQ(vf.group_of(shape, 0, 0), 0);
    EXPECT_EQ(vf.group_of(shape, 1, 1), 0);
    EXPECT_EQ(vf.group_of(shape, 4, 0), 2);  // w remainder joins high block
    EXPECT_EQ(vf.group_of(shape, 0, 4), 1);  // h remainder joins high block
    EXPECT_EQ(vf.group_of(shape, 4, 4), 3);
}

TEST(TraditionalShap, SinglePlayerGridSpreadsTheDropUniformly) {
    const Shape shape{1, 3, 2};
    BlackBoxModel model = testutil::random_model(80, shape, {4}, 2, Activation::relu, true);
    Image image = testutil::random_image(81, shape);
    Image baseline = Image::constant(shape, 0.25);
    SaliencyMap map = traditional_shap(model, image, 0, 1, 1, baseline);
    const double drop = forward(model, image)[0] - forward(model, baseline)[0];
    for (int i = 0; i < shape.size(); ++i) {
        EXPECT_NEAR(map.values[i], drop / shape.size(), 1e-12);
    }
    EXPECT_NEAR(map.total, drop, 1e-12);
    EXPECT_EQ(map.source, MapSource::traditional);
}

TEST(TraditionalShap, InputIgnoringModelGivesAllZeroMap) {
    const Shape shape{1, 4, 4};
    BlackBoxModel model;
    model.input_shape = shape;
    model.layers.push_back(
        DenseLayer{Matrix::Zero(2, 16), Vector::Zero(2), Activation::softmax_final});
    model.validate();
    SaliencyMap map =
        traditional_shap(model, testutil::random_image(82, shape), 0, 2, 2, Image::zeros(shape));
    EXPECT_EQ(map.values.cwiseAbs().maxCoeff(), 0.0);
}

// on a pre-softmax linear logit head the pixel-group game is additive, so
// each group's value has the closed form sum_i a_i (I_i - baseline_i)
TEST(TraditionalShap, LinearLogitModelMatchesClosedForm) {
    const Shape shape{1, 4, 4};
    std::mt19937_64 eng(83);
    Matrix a = testutil::random_matrix(eng, 2, shape.size());
    BlackBoxModel model;
    model.input_shape = shape;
    model.layers.push_back(DenseLayer{a, Vector::Zero(2), Activation::identity});
    model.validate();

    Image image = testutil::random_image(84, shape);
    Image baseline = Image::constant(shape, 0.5);
    SaliencyMap map = traditional_shap(model, image, 1, 2, 2, baseline);

    PixelGroupValueFunction vf;
    vf.grid_w = 2;
    vf.grid_h = 2;
    std::vector<double> group_value(4, 0.0);
    std::vector<int> group_count(4, 0);
    for (int w = 0; w < 4; ++w) {
        for (int h = 0; h < 4; ++h) {
            const int g = vf.group_of(shape, w, h);
            const int i = shape.index(0, w, h);
            group_value[static_cast<size_t>(g)] += a(1, i) * (image.data[i] - baseline.data[i]);
            group_count[static_cast<size_t>(g)] += 1;
        }
    }
    for (int w = 0; w < 4; ++w) {
        for (int h = 0; h < 4; ++h) {
            const int g = vf.group_of(shape, w, h);
            EXPECT_NEAR(map(0, w, h),
                        group_value[static_cast<size_t>(g)] / group_count[static_cast<size_t>(g)],
                        1e-9);
        }
    }
}

TEST(TraditionalShap, OversizedGridIsRejected) {
    const Shape shape{1, 2, 2};
    BlackBoxModel model = testutil::random_model(85, shape, {3}, 2, Activation::relu, true);
    testutil::expect_error_code("configuration-error", [&] {
        traditional_shap(model, Image::zeros(shape), 0, 3, 1, Image::zeros(shape));
    });
}

TEST(ManifoldShap, OnePlayerIsPureEfficiency) {
    ManifoldSetup s = make_setup(90, 1);
    AttributionVector attr = manifold_shap(s.model, s.codec, s.image, 2);
    Vector code = encode(s.codec, s.image);
    const double v_full = forward(s.model, decode(s.codec, code))[2];
    const double v_empty = forward(s.model, decode(s.codec, Vector::Zero(1)))[2];
    ASSERT_EQ(attr.players(), 1);
    EXPECT_NEAR(attr.values[0], v_full - v_empty, 1e-12);
}

TEST(ManifoldShap, ConstantComposedModelGivesZeroAttribution) {
    ManifoldSetup s = make_setup(91, 3);
    // zero first-layer weights: f(decode(u)) is constant in u
    s.model.layers.front().weights.setZero();
    AttributionVector attr = manifold_shap(s.model, s.codec, s.image, 0);
    EXPECT_EQ(attr.values.cwiseAbs().maxCoeff(), 0.0);
}

// linear codec + linear logit head induces an additive game on the code
TEST(ManifoldShap, LinearOnLinearMatchesTheInducedAdditiveGame) {
    const Shape shape{1, 3, 2};
    const int latent = 6;
    auto dataset = manifold_dataset(92, shape, 6, 30);
    ManifoldCodec codec = fit_linear_codec(dataset, latent);
    std::mt19937_64 eng(93);
    Matrix a = testutil::random_matrix(eng, 2, shape.size());
    BlackBoxModel model;
    model.input_shape = shape;
    model.layers.push_back(DenseLayer{a, Vector::Zero(2), Activation::identity});
    model.validate();

    Image image = testutil::random_image(94, shape);
    AttributionVector attr = manifold_shap(model, codec, image, 0);

    // f(decode(u))_0 = a0 . (mean + B u) = const + (a0^T B) u
    Vector coeff = codec.basis().transpose() * a.row(0).transpose();
    Vector code = encode(codec, image);
    for (int p = 0; p < latent; ++p) {
        EXPECT_NEAR(attr.values[p], coeff[p] * code[p], 1e-9) << "coordinate " << p;
    }
}

TEST(ManifoldShap, EfficiencyHoldsAcrossSeeds) {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        ManifoldSetup s = make_setup(seed, 4);
        AttributionVector attr = manifold_shap(s.model, s.codec, s.image, 0);
        EXPECT_NEAR(attr.total(), attr.v_full - attr.v_empty, 1e-9);
    }
}

TEST(RunEstimator, ForceSampledRoutesToTheSampler) {
    TabularGame game{3, {0, 1, 2, 3, 4, 5, 6, 7}};
    EstimatorConfig est;
    est.force_sampled = true;
    est.num_permutations = 6;  // 3! = 6: exhaustive, equals exact
    AttributionVector sampled =
        run_estimator(3, [&](std::uint32_t m) { return game(m); }, est);
    AttributionVector exact = shapley_exact(game);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(sampled.values[i], exact.values[i], 1e-12);
}
