#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "riskscape/datagen.hpp"
#include "riskscape/dataset_io.hpp"
#include "riskscape/linalg.hpp"

using namespace riskscape;

TEST_CASE("classification labels: fair coins at theta0 = 0") {
    GenConfig g;
    g.family = Family::classification;
    g.n = 4000;
    g.d = 3;
    g.theta0 = Theta0Spec::explicit_vec(ParamVec::Zero(3));
    g.seed = 1;
    auto [data, th0] = gen_classification(g);
    CHECK(th0.norm() == 0.0);
    const double mean = data.responses.mean();
    CHECK(std::abs(mean - 0.5) <= 3.0 / std::sqrt(static_cast<double>(g.n)));
}

TEST_CASE("classification labels saturate at large signal") {
    GenConfig g;
    g.family = Family::classification;
    g.n = 10000;
    g.d = 4;
    ParamVec big = ParamVec::Zero(4);
    big[0] = 100.0;
    g.theta0 = Theta0Spec::explicit_vec(big);
    g.seed = 2;
    auto [data, th0] = gen_classification(g);
    long agree = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i)
        if ((data.features(i, 0) > 0.0 ? 1.0 : 0.0) == data.responses[i]) ++agree;
    CHECK(static_cast<double>(agree) / static_cast<double>(data.n()) >= 0.99);
}

TEST_CASE("generation is bitwise deterministic in (cfg, seed)") {
    GenConfig g;
    g.family = Family::classification;
    g.n = 100;
    g.d = 5;
    g.seed = 42;
    auto [a, tha] = gen_classification(g);
    auto [b, thb] = gen_classification(g);
    CHECK((tha - thb).norm() == 0.0);
    CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.responses - b.responses).cwiseAbs().maxCoeff() == 0.0);

    g.seed = 43;
    auto [c, thc] = gen_classification(g);
    CHECK((a.features - c.features).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("regression: noiseless residuals vanish; contaminated variance matches") {
    GenConfig g;
    g.family = Family::robust_regression;
    g.n = 60;
    g.d = 4;
    g.noise = NoiseSpec::none();
    g.seed = 3;
    auto [data, th0] = gen_regression(g);
    const ParamVec resid = data.responses - data.features * th0;
    CHECK(resid.cwiseAbs().maxCoeff() == 0.0);

    GenConfig gc = g;
    gc.n = 60000;
    gc.noise = NoiseSpec::contaminated(0.5, 100.0);
    gc.seed = 4;
    auto [cdata, cth0] = gen_regression(gc);
    const ParamVec cres = cdata.responses - cdata.features * cth0;
    const double var = cres.squaredNorm() / static_cast<double>(gc.n);
    const double expect = 0.5 * 1.0 + 0.5 * 100.0;  // law of total variance
    CHECK(std::abs(var - expect) <= 0.10 * expect);
}

TEST_CASE("gmm2: degenerate separation gives a single gaussian around the center") {
    GenConfig g;
    g.family = Family::gmm2;
    g.n = 5000;
    g.d = 3;
    g.center1 = ParamVec::Constant(3, 0.7);
    g.center2 = ParamVec::Constant(3, 0.7);  // D = 0
    g.seed = 5;
    const Gmm2Data gen = gen_gmm2(g);
    const ParamVec mean = gen.data.features.colwise().mean().transpose();
    CHECK((mean - gen.center1).norm() <= 3.0 * std::sqrt(3.0 / static_cast<double>(g.n)));
}

TEST_CASE("gmm2 centers separated exactly as configured") {
    GenConfig g;
    g.family = Family::gmm2;
    g.n = 10;
    g.d = 6;
    g.separation = 1.5;  // |c2 - c1| = 3 as in the mixture experiments
    g.seed = 6;
    const Gmm2Data gen = gen_gmm2(g);
    CHECK((gen.center2 - gen.center1).norm() == doctest::Approx(3.0).epsilon(1e-12));
    const Gmm2Data again = gen_gmm2(g);
    CHECK((gen.data.features - again.data.features).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sparse theta0 has exactly s0 entries of magnitude 1/sqrt(s0)") {
    const ParamVec th = make_theta0(Theta0Spec::sparse(10), 100, 7);
    int nonzeros = 0;
    for (Eigen::Index i = 0; i < th.size(); ++i) {
        if (th[i] != 0.0) {
            ++nonzeros;
            CHECK(th[i] == doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(1e-15));
        }
    }
    CHECK(nonzeros == 10);
    CHECK(std::abs(th.norm() - 1.0) <= 4 * std::numeric_limits<double>::epsilon());
}

TEST_CASE("feature empirical covariance concentrates to the identity") {
    for (std::uint64_t seed : {10ull, 11ull, 12ull}) {
        GenConfig g;
        g.family = Family::robust_regression;
        g.n = 2000;
        g.d = 20;
        g.seed = seed;
        auto [data, th0] = gen_regression(g);
        const Matrix cov =
            (data.features.transpose() * data.features) / static_cast<double>(g.n);
        const double dev = sym_op_norm(cov - Matrix::Identity(g.d, g.d));
        const double ratio = static_cast<double>(g.d) / static_cast<double>(g.n);
        CHECK(dev <= 4.0 * (std::sqrt(ratio) + ratio));
    }
}

TEST_CASE("custom covariance feature law") {
    Matrix cov = Matrix::Identity(2, 2);
    cov(0, 0) = 4.0;
    cov(0, 1) = cov(1, 0) = 1.0;
    GenConfig g;
    g.family = Family::robust_regression;
    g.n = 50000;
    g.d = 2;
    g.features.kind = FeatureLaw::Kind::custom_covariance;
    g.features.covariance = cov;
    g.seed = 13;
    auto [data, th0] = gen_regression(g);
    const Matrix emp = (data.features.transpose() * data.features) / static_cast<double>(g.n);
    CHECK((emp - cov).cwiseAbs().maxCoeff() <= 0.15);
}

TEST_CASE("config validation") {
    GenConfig g;
    g.family = Family::classification;
    g.n = 0;
    g.d = 5;
    CHECK_THROWS_AS(gen_classification(g), InvalidInput);
    g.n = 10;
    g.theta0 = Theta0Spec::sparse(11, 1.0);
    g.d = 10;
    CHECK_THROWS_AS(gen_classification(g), InvalidInput);
    GenConfig gg;
    gg.family = Family::gmm2;
    gg.n = 10;
    gg.d = 2;
    gg.separation = -1.0;
    CHECK_THROWS_AS(gen_gmm2(gg), InvalidInput);
}

TEST_CASE("binary and csv round trips preserve the dataset") {
    GenConfig g;
    g.family = Family::classification;
    g.n = 23;
    g.d = 4;
    g.seed = 21;
    auto [data, th0] = gen_classification(g);

    const std::string bin = "/tmp/riskscape_test_ds.bin";
    write_dataset(bin, data);
    const Dataset back = read_dataset(bin);
    CHECK(back.family == Family::classification);
    CHECK(back.response_kind == ResponseKind::binary);
    CHECK((back.features - data.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.responses - data.responses).cwiseAbs().maxCoeff() == 0.0);

    const std::string csv = "/tmp/riskscape_test_ds.csv";
    write_dataset_csv(csv, data);
    const Dataset csvback = read_dataset_csv(csv, ResponseKind::binary, Family::classification);
    CHECK((csvback.features - data.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK((csvback.responses - data.responses).cwiseAbs().maxCoeff() == 0.0);
    std::remove(bin.c_str());
    std::remove(csv.c_str());
}

TEST_CASE("dataset io rejects corrupted files") {
    const std::string path = "/tmp/riskscape_bad.bin";
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite("NOPE", 1, 4, f);
    std::fclose(f);
    CHECK_THROWS_AS(read_dataset(path), InvalidInput);
    std::remove(path.c_str());
}
