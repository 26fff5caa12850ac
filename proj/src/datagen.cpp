#include "riskscape/datagen.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "riskscape/rng.hpp"

namespace riskscape {

namespace {

// substream tags
enum : std::uint64_t { kTheta0 = 1, kFeatures = 2, kNoise = 3, kCenters = 4, kLabels = 5 };

RowMatrix draw_features(const GenConfig& cfg, Rng& rng) {
    RowMatrix x(cfg.n, cfg.d);
    for (Eigen::Index i = 0; i < cfg.n; ++i)
        for (Eigen::Index j = 0; j < cfg.d; ++j) x(i, j) = rng.normal();
    if (cfg.features.kind == FeatureLaw::Kind::custom_covariance) {
        if (cfg.features.covariance.rows() != cfg.d || cfg.features.covariance.cols() != cfg.d)
            throw InvalidInput("datagen: covariance shape mismatch");
        Eigen::LLT<Matrix> llt(cfg.features.covariance);
        if (llt.info() != Eigen::Success) throw InvalidInput("datagen: covariance not SPD");
        const Matrix l = llt.matrixL();
        x = x * l.transpose();
    }
    return x;
}

double draw_noise(const NoiseSpec& noise, Rng& rng) {
    switch (noise.kind) {
        case NoiseSpec::Kind::none: return 0.0;
        case NoiseSpec::Kind::gaussian: return std::sqrt(noise.sigma2) * rng.normal();
        case NoiseSpec::Kind::contaminated: {
            // draw the branch first so the normal stream stays aligned
            const bool outlier = rng.bernoulli(noise.delta);
            const double s = outlier ? std::sqrt(noise.sigma2_out) : 1.0;
            return s * rng.normal();
        }
    }
    return 0.0;
}

}  // namespace

Theta0Spec Theta0Spec::explicit_vec(ParamVec v) {
    Theta0Spec s;
    s.kind = Kind::explicit_vec;
    s.vec = std::move(v);
    return s;
}

Theta0Spec Theta0Spec::random_norm(double nrm) {
    Theta0Spec s;
    s.kind = Kind::random_norm;
    s.norm = nrm;
    return s;
}

Theta0Spec Theta0Spec::sparse(int s0, double nrm) {
    Theta0Spec s;
    s.kind = Kind::sparse;
    s.s0 = s0;
    s.norm = nrm;
    return s;
}

void GenConfig::validate() const {
    if (n < 1 || d < 1) throw InvalidInput("datagen: n and d must be positive");
    if (noise.kind == NoiseSpec::Kind::gaussian && noise.sigma2 < 0.0)
        throw InvalidInput("datagen: negative noise variance");
    if (noise.kind == NoiseSpec::Kind::contaminated &&
        (noise.delta < 0.0 || noise.delta > 1.0 || noise.sigma2_out < 0.0))
        throw InvalidInput("datagen: bad contamination parameters");
    if (family == Family::gmm2 && center1.size() == 0 && !(separation > 0.0))
        throw InvalidInput("datagen: separation must be positive");
    if (theta0.kind == Theta0Spec::Kind::sparse && (theta0.s0 < 1 || theta0.s0 > d))
        throw InvalidInput("datagen: sparse s0 out of range");
    if (theta0.kind == Theta0Spec::Kind::explicit_vec && theta0.vec.size() != d)
        throw InvalidInput("datagen: explicit theta0 dimension mismatch");
}

ParamVec make_theta0(const Theta0Spec& spec, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    switch (spec.kind) {
        case Theta0Spec::Kind::explicit_vec: return spec.vec;
        case Theta0Spec::Kind::random_norm: return spec.norm * rng.unit_vector(d);
        case Theta0Spec::Kind::sparse: {
            ParamVec v = ParamVec::Zero(d);
            const double mag = spec.norm / std::sqrt(static_cast<double>(spec.s0));
            // seeded support positions without replacement
            int placed = 0;
            while (placed < spec.s0) {
                const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(d)));
                if (v[j] == 0.0) {
                    v[j] = mag;
                    ++placed;
                }
            }
            return v;
        }
    }
    return ParamVec();
}

std::pair<Dataset, ParamVec> gen_classification(const GenConfig& cfg) {
    cfg.validate();
    const ParamVec theta0 = make_theta0(cfg.theta0, cfg.d, derive_seed(cfg.seed, kTheta0));
    Rng xrng(derive_seed(cfg.seed, kFeatures));
    Dataset data;
    data.family = Family::classification;
    data.response_kind = ResponseKind::binary;
    data.features = draw_features(cfg, xrng);
    data.responses.resize(cfg.n);
    Rng yrng(derive_seed(cfg.seed, kLabels));
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        const double p = cfg.activation.value(data.features.row(i) * theta0);
        data.responses[i] = yrng.bernoulli(p) ? 1.0 : 0.0;
    }
    return {std::move(data), theta0};
}

std::pair<Dataset, ParamVec> gen_regression(const GenConfig& cfg) {
    cfg.validate();
    const ParamVec theta0 = make_theta0(cfg.theta0, cfg.d, derive_seed(cfg.seed, kTheta0));
    Rng xrng(derive_seed(cfg.seed, kFeatures));
    Dataset data;
    data.family = Family::robust_regression;
    data.response_kind = ResponseKind::real;
    data.features = draw_features(cfg, xrng);
    data.responses.resize(cfg.n);
    Rng erng(derive_seed(cfg.seed, kNoise));
    for (Eigen::Index i = 0; i < cfg.n; ++i)
        data.responses[i] = data.features.row(i) * theta0 + draw_noise(cfg.noise, erng);
    return {std::move(data), theta0};
}

Gmm2Data gen_gmm2(const GenConfig& cfg) {
    cfg.validate();
    Gmm2Data out;
    if (cfg.center1.size() > 0) {
        if (cfg.center1.size() != cfg.d || cfg.center2.size() != cfg.d)
            throw InvalidInput("datagen: explicit centers dimension mismatch");
        out.center1 = cfg.center1;
        out.center2 = cfg.center2;
    } else {
        Rng crng(derive_seed(cfg.seed, kCenters));
        const ParamVec u = crng.unit_vector(cfg.d);
        out.center1 = -cfg.separation * u;
        out.center2 = cfg.separation * u;
    }
    out.data.family = Family::gmm2;
    out.data.response_kind = ResponseKind::none;
    out.data.features.resize(cfg.n, cfg.d);
    Rng zrng(derive_seed(cfg.seed, kFeatures));
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        const bool second = zrng.bernoulli(0.5);  // component label, discarded
        const ParamVec& c = second ? out.center2 : out.center1;
        for (Eigen::Index j = 0; j < cfg.d; ++j) out.data.features(i, j) = c[j] + zrng.normal();
    }
    return out;
}

}  // namespace riskscape
