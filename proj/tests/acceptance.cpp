// Release gate for the toolkit: ten executable criteria covering estimator
// correctness, the shared axioms, the Jacobian machinery, fusion, metric
// sanity, the dimension-sweep trend, and end-to-end determinism. Each
// criterion prints one [PASS]/[FAIL] summary line.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fshap/fshap.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

fshap::TabularGame random_game(std::uint64_t seed, int n) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    fshap::TabularGame game;
    game.n = n;
    game.v.resize(1u << n);
    for (double& v : game.v) v = unif(eng);
    return game;
}

// Additive payoffs with small pairwise couplings: the permutation estimator's
// per-ordering marginals vary only through the couplings, so its error is far
// inside the acceptance margin while the game stays non-trivial.
fshap::TabularGame near_additive_game(std::uint64_t seed, int n) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> base(0.5, 1.5);
    std::uniform_real_distribution<double> eps(-0.02, 0.02);
    std::vector<double> a(n);
    for (double& v : a) v = base(eng);
    fshap::Matrix pair = fshap::Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) pair(i, j) = eps(eng);
    }
    fshap::TabularGame game;
    game.n = n;
    game.v.resize(1u << n);
    for (std::uint32_t mask = 0; mask < game.v.size(); ++mask) {
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) continue;
            v += a[i];
            for (int j = i + 1; j < n; ++j) {
                if (mask & (1u << j)) v += pair(i, j);
            }
        }
        game.v[mask] = v;
    }
    return game;
}

fshap::ManifoldCodec layered_codec(std::uint64_t seed, fshap::Shape shape, int latent,
                                   int hidden) {
    std::mt19937_64 eng(seed);
    fshap::ManifoldCodec codec;
    codec.kind = fshap::CodecKind::layered;
    codec.image_shape = shape;
    codec.latent_dim = latent;
    codec.mean_image = testutil::random_vector(eng, shape.size(), 0.3);
    codec.decoder_layers = {
        fshap::DenseLayer{testutil::random_matrix(eng, hidden, latent, 0.7),
                          testutil::random_vector(eng, hidden, 0.2), fshap::Activation::tanh},
        fshap::DenseLayer{testutil::random_matrix(eng, shape.size(), hidden, 0.7),
                          testutil::random_vector(eng, shape.size(), 0.2),
                          fshap::Activation::identity}};
    codec.encoder_layers = {
        fshap::DenseLayer{testutil::random_matrix(eng, hidden, shape.size(), 0.7),
                          testutil::random_vector(eng, hidden, 0.2), fshap::Activation::tanh},
        fshap::DenseLayer{testutil::random_matrix(eng, latent, hidden, 0.7),
                          testutil::random_vector(eng, latent, 0.2),
                          fshap::Activation::identity}};
    codec.validate();
    return codec;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::string& scratch) {
    const std::string out_path = scratch + "/acc_stdout.txt";
    const std::string err_path = scratch + "/acc_stderr.txt";
    const std::string cmd =
        std::string(FSHAP_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int raw = std::system(cmd.c_str());
    CliResult res;
    res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    res.out = fshap::io::read_file(out_path);
    res.err = fshap::io::read_file(err_path);
    return res;
}

std::string data_file(const std::string& name) {
    return std::string(FSHAP_DATA_DIR) + "/" + name;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace

// 25 seeded games, 2 to 8 players: exact enumeration must match an
// independent brute-force average over all player orderings to 1e-12.
TEST(Acceptance, Criterion01) {
    const auto t0 = Clock::now();
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + trial % 7;
        const fshap::TabularGame game = random_game(1000 + trial, n);
        const fshap::AttributionVector exact = fshap::shapley_exact(game);
        const std::vector<double> expect =
            oracle::permutation_shapley(n, [&](std::uint32_t m) { return game.v[m]; });
        for (int p = 0; p < n; ++p) {
            ASSERT_NEAR(exact.values[p], expect[p], 1e-12) << "trial " << trial << " player " << p;
        }
    }
    EXPECT_LT(seconds_since(t0), 10.0);
}

// Every exact computation allocates exactly v(full) - v(empty), on the
// manifold substrate (baseline and empirical imputation) and on the
// pixel-group substrate.
TEST(Acceptance, Criterion02) {
    const fshap::Shape shape{1, 4, 3};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto model = testutil::random_model(seed, shape, {9}, 3);
        const auto codec = layered_codec(seed + 60, shape, 5, 7);
        const auto image = testutil::random_image(seed + 120, shape);

        fshap::ManifoldShapConfig mcfg;
        mcfg.seed = seed;
        auto attr = fshap::manifold_shap(model, codec, image, 1, mcfg);
        EXPECT_LE(std::abs(attr.total() - (attr.v_full - attr.v_empty)), 1e-9);

        mcfg.imputation = fshap::Imputation::empirical;
        std::mt19937_64 eng(seed + 500);
        for (int k = 0; k < 6; ++k) {
            mcfg.empirical_pool.push_back(testutil::random_vector(eng, 5, 0.8));
        }
        auto emp = fshap::manifold_shap(model, codec, image, 1, mcfg);
        EXPECT_LE(std::abs(emp.total() - (emp.v_full - emp.v_empty)), 1e-9);

        const auto baseline = testutil::random_image(seed + 240, shape);
        auto map = fshap::traditional_shap(model, image, 1, 2, 3, baseline);
        const double drop =
            fshap::forward(model, image)[1] - fshap::forward(model, baseline)[1];
        EXPECT_LE(std::abs(map.total - drop), 1e-9);
    }
}

// A player whose membership never changes the payoff gets exactly zero; two
// interchangeable players get exactly equal values.
TEST(Acceptance, Criterion03) {
    fshap::TabularGame game;
    game.n = 5;
    game.v.resize(1u << 5);
    for (std::uint32_t mask = 0; mask < game.v.size(); ++mask) {
        const bool p0 = mask & 1u, p1 = mask & 2u, p2 = mask & 4u, p3 = mask & 8u;
        double v = 1.2 * p0 + 1.2 * p1 + 0.8 * (p2 && p3);
        if ((p0 || p1) && p2) v += 0.3;
        if (p0 && p1) v += 0.45;
        game.v[mask] = v;  // player 4 never appears
    }
    const auto attr = fshap::shapley_exact(game);
    EXPECT_LE(std::abs(attr.values[4]), 1e-9);
    EXPECT_LE(std::abs(attr.values[0] - attr.values[1]), 1e-9);

    const auto verdict = fshap::check_axioms(game, attr.values, 1e-9);
    EXPECT_TRUE(verdict.all_pass());
    EXPECT_GE(verdict.null_count, 1);
    EXPECT_GE(verdict.symmetric_pair_count, 1);
}

// The permutation estimator reproduces exact values when it enumerates all
// orderings, and stays within 2% of max|phi| with 2000 seeded permutations
// on an 8-player game.
TEST(Acceptance, Criterion04) {
    const fshap::TabularGame small = random_game(42, 4);
    const auto exact4 = fshap::shapley_exact(small);
    const auto sampled4 = fshap::shapley_sampled(small, 24, 7);
    for (int p = 0; p < 4; ++p) EXPECT_NEAR(sampled4.values[p], exact4.values[p], 1e-12);

    const fshap::TabularGame big = near_additive_game(55, 8);
    const auto exact8 = fshap::shapley_exact(big);
    const auto sampled8 = fshap::shapley_sampled(big, 2000, 2024);
    const double scale = exact8.values.cwiseAbs().maxCoeff();
    const double err = (sampled8.values - exact8.values).cwiseAbs().maxCoeff();
    EXPECT_LT(err, 0.02 * scale) << "err " << err << " vs scale " << scale;
}

// Analytic decoder Jacobians against central finite differences with step
// 1e-5 over 50 random (codec, code) pairs, relative Frobenius error 1e-4.
TEST(Acceptance, Criterion05) {
    const fshap::Shape shape{1, 3, 3};
    for (int trial = 0; trial < 50; ++trial) {
        const int latent = 2 + trial % 3;
        fshap::ManifoldCodec codec;
        if (trial % 5 == 0) {
            std::vector<fshap::Image> data;
            for (int j = 0; j < 12; ++j) {
                data.push_back(testutil::random_image(900 + trial * 20 + j, shape));
            }
            codec = fshap::fit_linear_codec(data, latent);
        } else {
            codec = layered_codec(300 + trial, shape, latent, 6);
        }
        std::mt19937_64 eng(7000 + trial);
        const fshap::Vector code = testutil::random_vector(eng, latent, 0.9);

        const fshap::Matrix analytic = fshap::jacobian(codec, code);
        const auto fd = oracle::fd_jacobian(
            [&](const std::vector<double>& u) {
                return testutil::to_std(fshap::decode(codec, testutil::from_std(u)).data);
            },
            testutil::to_std(code), 1e-5);

        double num = 0.0, den = 0.0;
        for (int i = 0; i < shape.size(); ++i) {
            for (int p = 0; p < latent; ++p) {
                num += std::pow(analytic(i, p) - fd[i][p], 2);
                den += std::pow(fd[i][p], 2);
            }
        }
        EXPECT_LE(std::sqrt(num) / std::max(std::sqrt(den), 1e-12), 1e-4) << "trial " << trial;
    }
}

// Redistribution through the decoder Jacobian conserves the attribution
// total on 20 seeded model/codec/image triples.
TEST(Acceptance, Criterion06) {
    const fshap::Shape shape{1, 4, 3};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto model = testutil::random_model(seed + 11, shape, {8}, 2);
        const auto codec = layered_codec(seed + 71, shape, 4 + seed % 3, 7);
        const auto image = testutil::random_image(seed + 131, shape);

        const auto attr = fshap::manifold_shap(model, codec, image, 0);
        const fshap::Matrix jac = fshap::jacobian(codec, fshap::encode(codec, image));
        const auto map = fshap::redistribute(attr, jac, shape);
        EXPECT_LE(std::abs(map.total - attr.total()), 1e-9) << "seed " << seed;
    }
}

// The chosen fusion coefficient attains the minimum of the recorded
// objective curve and never loses to either endpoint.
TEST(Acceptance, Criterion07) {
    const fshap::Shape shape{1, 4, 4};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto model = testutil::random_model(seed + 33, shape, {10}, 3);
        const auto image = testutil::random_image(seed + 77, shape);
        std::mt19937_64 eng(seed + 99);
        const fshap::SaliencyMap t(shape, testutil::random_vector(eng, shape.size(), 1.0),
                                   fshap::MapSource::traditional);
        const fshap::SaliencyMap m(shape, testutil::random_vector(eng, shape.size(), 1.0),
                                   fshap::MapSource::manifold);

        const fshap::FusionResult fr = fshap::fuse(model, image, t, m, 101);
        ASSERT_EQ(fr.objective_curve.size(), 101u);
        double best = fr.objective_curve.front().second;
        double best_alpha = fr.objective_curve.front().first;
        for (const auto& [alpha, objective] : fr.objective_curve) {
            if (objective < best) {
                best = objective;
                best_alpha = alpha;
            }
        }
        EXPECT_EQ(fr.chosen_objective, best);
        EXPECT_EQ(fr.alpha, best_alpha);
        EXPECT_LE(fr.chosen_objective, fr.objective_curve.front().second);
        EXPECT_LE(fr.chosen_objective, fr.objective_curve.back().second);
    }
}

// The gradient of a linear confidence surrogate has zero infidelity; a
// constant explainer has zero sensitivity; both are seed-deterministic.
TEST(Acceptance, Criterion08) {
    const fshap::Shape shape{1, 4, 4};
    const auto model = testutil::random_model(21, shape, {}, 2,
                                                 fshap::Activation::relu, /*softmax=*/false);
    const auto image = testutil::random_image(22, shape);
    fshap::Vector conf = fshap::forward(model, image);
    int top = 0;
    conf.maxCoeff(&top);

    const auto grad = fshap::baseline_gradient(model, image, top);
    fshap::PerturbationSpec pert;
    pert.num_samples = 256;
    pert.seed = 5;
    const double infd = fshap::infidelity(model, image, grad, pert, top);
    EXPECT_LE(infd, 1e-12);
    EXPECT_EQ(infd, fshap::infidelity(model, image, grad, pert, top));

    const fshap::SaliencyMap fixed(shape, fshap::Vector::Constant(shape.size(), 0.25),
                                   fshap::MapSource::baseline_method);
    fshap::Explainer constant = [&](const fshap::BlackBoxModel&, const fshap::Image&) {
        return fixed;
    };
    const double sen = fshap::sensitivity(constant, model, image, 0.5, 16, 6);
    EXPECT_EQ(sen, 0.0);
    EXPECT_EQ(fshap::sensitivity(constant, model, image, 0.5, 16, 6), sen);
}

// On the bundled low-rank task, richer codecs explain better: pooled over 5
// seeds, infidelity falls with the codec dimension (Spearman <= -0.5) and
// sensitivity falls as well (negative Spearman), inside 2 minutes.
TEST(Acceptance, Criterion09) {
    const auto t0 = Clock::now();
    testutil::TempDir dir("acceptance_sweep");
    std::vector<double> dims, infds, sens;
    for (int seed = 1; seed <= 5; ++seed) {
        const std::string out = dir.file("s" + std::to_string(seed));
        const auto res = run_cli("sweep-dims --dims 2,4,8,16 --model " +
                                     data_file("task_model.json") + " --image " +
                                     data_file("task_image.csv") + " --dataset " +
                                     data_file("task_dataset.csv") + " --seed " +
                                     std::to_string(seed) + " --num-probes 8 --num-samples 128" +
                                     " --out " + out,
                                 dir.path().string());
        ASSERT_EQ(res.exit_code, 0) << res.err;
        const auto rows = csv_rows(fshap::io::read_file(out + "/sweep.csv"));
        ASSERT_EQ(rows.size(), 5u);
        for (size_t i = 1; i < rows.size(); ++i) {
            ASSERT_EQ(rows[i].at(1), "ok") << "seed " << seed;
            dims.push_back(std::stod(rows[i].at(0)));
            infds.push_back(std::stod(rows[i].at(2)));
            sens.push_back(std::stod(rows[i].at(3)));
        }
    }
    const double rho_infd = oracle::spearman(dims, infds);
    const double rho_sen = oracle::spearman(dims, sens);
    EXPECT_LE(rho_infd, -0.5) << "infidelity trend too weak";
    EXPECT_LT(rho_sen, 0.0) << "sensitivity trend not negative";
    EXPECT_LT(seconds_since(t0), 120.0);
}

// Repeating any subcommand with the same config and seed produces
// byte-identical artifacts.
TEST(Acceptance, Criterion10) {
    testutil::TempDir dir("acceptance_determinism");
    const std::string base = " --model " + data_file("task_model.json") + " --image " +
                             data_file("task_image.csv") + " --codec " +
                             data_file("task_codec.json") + " --dataset " +
                             data_file("task_dataset.csv") + " --seed 3";

    auto compare = [&](const std::string& cmd, const std::vector<std::string>& artifacts) {
        const std::string a = dir.file("a");
        const std::string b = dir.file("b");
        ASSERT_EQ(run_cli(cmd + " --out " + a, dir.path().string()).exit_code, 0) << cmd;
        ASSERT_EQ(run_cli(cmd + " --out " + b, dir.path().string()).exit_code, 0) << cmd;
        for (const auto& name : artifacts) {
            EXPECT_EQ(fshap::io::read_file(a + "/" + name), fshap::io::read_file(b + "/" + name))
                << name << " differs for: " << cmd;
        }
    };

    compare("explain" + base,
            {"fused_saliency.csv", "fused_heatmap.pgm", "fused_explain.json"});
    compare("metrics" + base + " --num-samples 32 --num-probes 2 --radius 0.1",
            {"metrics.csv", "metrics.json"});
    compare("sweep-dims" + base + " --dims 2,4 --num-samples 16 --num-probes 2 --radius 0.1",
            {"sweep.csv", "sweep.json"});

    const std::string fit = "fit-codec --dataset " + data_file("task_dataset.csv") +
                            " --latent-dim 3 --out-file ";
    ASSERT_EQ(run_cli(fit + dir.file("c1.json"), dir.path().string()).exit_code, 0);
    ASSERT_EQ(run_cli(fit + dir.file("c2.json"), dir.path().string()).exit_code, 0);
    EXPECT_EQ(fshap::io::read_file(dir.file("c1.json")), fshap::io::read_file(dir.file("c2.json")));
}

namespace {

const std::map<std::string, std::string> kCriterionLabels = {
    {"Criterion01", "criterion 1: exact Shapley matches the all-orderings oracle on 25 games"},
    {"Criterion02", "criterion 2: exact attributions sum to v(full) - v(empty) on both substrates"},
    {"Criterion03", "criterion 3: dummy features get zero, interchangeable features get equal"},
    {"Criterion04", "criterion 4: sampled estimator is exhaustive-exact and within 2% at n=8"},
    {"Criterion05", "criterion 5: analytic Jacobians match finite differences on 50 pairs"},
    {"Criterion06", "criterion 6: pixel redistribution conserves the attribution total"},
    {"Criterion07", "criterion 7: fusion coefficient attains the objective-curve minimum"},
    {"Criterion08", "criterion 8: linear-surrogate infidelity and constant-explainer sensitivity vanish"},
    {"Criterion09", "criterion 9: infidelity and sensitivity fall with codec dimension"},
    {"Criterion10", "criterion 10: repeated runs produce byte-identical artifacts"},
};

class SummaryPrinter : public ::testing::EmptyTestEventListener {
    void OnTestEnd(const ::testing::TestInfo& info) override {
        const auto it = kCriterionLabels.find(info.name());
        const std::string label = it == kCriterionLabels.end() ? info.name() : it->second;
        std::printf("%s %s\n", info.result()->Passed() ? "[PASS]" : "[FAIL]", label.c_str());
        std::fflush(stdout);
    }
};

}  // namespace

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::UnitTest::GetInstance()->listeners().Append(new SummaryPrinter);
    return RUN_ALL_TESTS();
}
