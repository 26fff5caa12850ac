#include "riskscape/models.hpp"

#include <cmath>

#include "riskscape/parallel.hpp"

namespace riskscape {

namespace {

double stable_logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// symmetric in (a, b) bit-for-bit, which keeps the mixture risk exactly
// exchange-invariant
double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct SampleTerms {
    double loss = 0.0;
    double alpha = 0.0;  // gradient coefficient on x
    double beta = 0.0;   // Hessian coefficient on x x^T
};

SampleTerms classification_terms(const Activation& act, double u, double y) {
    const double s = act.value(u);
    const double s1 = act.d1(u);
    const double r = s - y;
    SampleTerms t;
    t.loss = r * r;
    t.alpha = 2.0 * r * s1;
    t.beta = 2.0 * (s1 * s1 + r * act.d2(u));
    return t;
}

SampleTerms regression_terms(const RobustLoss& loss, double resid) {
    SampleTerms t;
    t.loss = loss.rho(resid);
    t.alpha = -loss.psi(resid);  // gradient is -psi(y - <theta,x>) x
    t.beta = loss.dpsi(resid);
    return t;
}

void check_inputs(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    if (theta.size() != spec.param_dim(data.dim()))
        throw InvalidInput("models: theta dimension does not match family/data");
    if (!theta.allFinite()) throw InvalidInput("models: non-finite theta");
    switch (spec.family) {
        case Family::classification:
            if (data.response_kind != ResponseKind::binary || data.responses.size() != data.n())
                throw InvalidInput("models: classification requires binary responses");
            break;
        case Family::robust_regression:
            if (data.response_kind != ResponseKind::real || data.responses.size() != data.n())
                throw InvalidInput("models: regression requires real responses");
            break;
        case Family::gmm2:
            break;
    }
    if (data.n() == 0) throw InvalidInput("models: empty dataset");
}

BlockPlan scalar_plan(Eigen::Index n) { return make_block_plan(static_cast<std::size_t>(n), 1024, 256); }

BlockPlan matrix_plan(Eigen::Index n, Eigen::Index p) {
    // cap partial-buffer memory at ~32M doubles across blocks
    const std::size_t budget = (1u << 22);
    const std::size_t per_block = static_cast<std::size_t>(p) * static_cast<std::size_t>(p);
    std::size_t max_blocks = per_block > 0 ? std::max<std::size_t>(1, budget / per_block) : 64;
    max_blocks = std::min<std::size_t>(max_blocks, 64);
    return make_block_plan(static_cast<std::size_t>(n), 1024, max_blocks);
}

// ---- gmm2 helpers ----

struct GmmViews {
    Eigen::Ref<const ParamVec> th1, th2;
    Eigen::Index d;
};

GmmViews gmm_views(const ParamVec& theta) {
    const Eigen::Index d = theta.size() / 2;
    return {theta.head(d), theta.tail(d), d};
}

double gmm_loss_at(const GmmViews& v, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
    const double q1 = -0.5 * (z.transpose() - v.th1).squaredNorm();
    const double q2 = -0.5 * (z.transpose() - v.th2).squaredNorm();
    return M_LN2 - logsumexp2(q1, q2) + 0.5 * static_cast<double>(v.d) * std::log(2.0 * M_PI);
}

}  // namespace

// ---- named constructions ----

std::string family_name(Family f) {
    switch (f) {
        case Family::classification: return "classification";
        case Family::robust_regression: return "robust-regression";
        case Family::gmm2: return "gmm2";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "classification") return Family::classification;
    if (name == "robust-regression" || name == "regression") return Family::robust_regression;
    if (name == "gmm2") return Family::gmm2;
    throw InvalidInput("unknown family: " + name);
}

Activation Activation::logistic() {
    Activation a;
    a.name = "logistic";
    a.value = [](double z) { return stable_logistic(z); };
    a.d1 = [](double z) {
        const double s = stable_logistic(z);
        return s * (1.0 - s);
    };
    a.d2 = [](double z) {
        const double s = stable_logistic(z);
        return s * (1.0 - s) * (1.0 - 2.0 * s);
    };
    a.d3 = [](double z) {
        const double s = stable_logistic(z);
        return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s);
    };
    return a;
}

Activation Activation::probit() {
    Activation a;
    a.name = "probit";
    a.value = [](double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); };
    a.d1 = [](double z) { return normal_pdf(z); };
    a.d2 = [](double z) { return -z * normal_pdf(z); };
    a.d3 = [](double z) { return (z * z - 1.0) * normal_pdf(z); };
    return a;
}

RobustLoss RobustLoss::tukey(double t0) {
    if (!(t0 > 0.0)) throw InvalidInput("tukey: t0 must be positive");
    RobustLoss l;
    l.name = "tukey";
    l.t0 = t0;
    l.breakpoints = {t0};
    const double t0sq = t0 * t0;
    l.rho = [t0, t0sq](double t) {
        if (std::abs(t) >= t0) return 1.0;
        const double u = 1.0 - t * t / t0sq;
        return 1.0 - u * u * u;
    };
    l.psi = [t0, t0sq](double t) {
        if (std::abs(t) >= t0) return 0.0;
        const double u = 1.0 - t * t / t0sq;
        return 6.0 * t / t0sq * u * u;
    };
    l.dpsi = [t0, t0sq](double t) {
        if (std::abs(t) >= t0) return 0.0;
        const double u = t * t / t0sq;
        return 6.0 / t0sq * (1.0 - u) * (1.0 - 5.0 * u);
    };
    l.d2psi = [t0, t0sq](double t) {
        if (std::abs(t) >= t0) return 0.0;
        const double u = t * t / t0sq;
        return 24.0 * t / (t0sq * t0sq) * (5.0 * u - 3.0);
    };
    return l;
}

RobustLoss RobustLoss::huber(double c) {
    if (!(c > 0.0)) throw InvalidInput("huber: threshold must be positive");
    RobustLoss l;
    l.name = "huber";
    l.t0 = c;
    l.breakpoints = {c};
    l.rho = [c](double t) {
        const double a = std::abs(t);
        return a <= c ? 0.5 * t * t : c * a - 0.5 * c * c;
    };
    l.psi = [c](double t) { return std::abs(t) <= c ? t : std::copysign(c, t); };
    l.dpsi = [c](double t) { return std::abs(t) <= c ? 1.0 : 0.0; };
    l.d2psi = [](double) { return 0.0; };
    return l;
}

void Dataset::validate() const {
    if (!features.allFinite()) throw InvalidInput("dataset: non-finite feature entries");
    switch (response_kind) {
        case ResponseKind::none:
            if (responses.size() != 0) throw InvalidInput("dataset: unexpected responses");
            break;
        case ResponseKind::binary:
            if (responses.size() != n()) throw InvalidInput("dataset: response count mismatch");
            for (Eigen::Index i = 0; i < responses.size(); ++i)
                if (responses[i] != 0.0 && responses[i] != 1.0)
                    throw InvalidInput("dataset: binary responses must be 0 or 1");
            break;
        case ResponseKind::real:
            if (responses.size() != n()) throw InvalidInput("dataset: response count mismatch");
            if (!responses.allFinite()) throw InvalidInput("dataset: non-finite responses");
            break;
    }
}

void ModelSpec::validate() const {
    if (!(radius > 0.0)) throw InvalidInput("model spec: radius must be positive");
    if (lambda < 0.0) throw InvalidInput("model spec: lambda must be nonnegative");
    if (theta0 && family != Family::gmm2) {
        const double bound = lambda > 0.0 ? radius / 2.0 : radius / 3.0;
        if (theta0->norm() > bound * (1.0 + 1e-12))
            throw InvalidInput("model spec: |theta0| exceeds " +
                               std::string(lambda > 0.0 ? "r/2" : "r/3"));
    }
}

double gmm_posterior1(const Eigen::Ref<const ParamVec>& th1, const Eigen::Ref<const ParamVec>& th2,
                      const Eigen::Ref<const ParamVec>& z) {
    const double q1 = -0.5 * (z - th1).squaredNorm();
    const double q2 = -0.5 * (z - th2).squaredNorm();
    return stable_logistic(q1 - q2);
}

double gmm_point_loss(const ParamVec& theta, const Eigen::Ref<const ParamVec>& z) {
    const GmmViews v = gmm_views(theta);
    const double q1 = -0.5 * (z - v.th1).squaredNorm();
    const double q2 = -0.5 * (z - v.th2).squaredNorm();
    return M_LN2 - logsumexp2(q1, q2) + 0.5 * static_cast<double>(v.d) * std::log(2.0 * M_PI);
}

ParamVec gmm_point_grad(const ParamVec& theta, const Eigen::Ref<const ParamVec>& z) {
    const GmmViews v = gmm_views(theta);
    const double q1 = -0.5 * (z - v.th1).squaredNorm();
    const double q2 = -0.5 * (z - v.th2).squaredNorm();
    ParamVec g(theta.size());
    g.head(v.d) = stable_logistic(q1 - q2) * (v.th1 - z);
    g.tail(v.d) = stable_logistic(q2 - q1) * (v.th2 - z);
    return g;
}

Matrix gmm_point_hess(const ParamVec& theta, const Eigen::Ref<const ParamVec>& z) {
    const GmmViews v = gmm_views(theta);
    const Eigen::Index d = v.d;
    const ParamVec a = z - v.th1;
    const ParamVec b = z - v.th2;
    const double q1 = -0.5 * a.squaredNorm();
    const double q2 = -0.5 * b.squaredNorm();
    const double w1 = stable_logistic(q1 - q2);
    const double w2 = stable_logistic(q2 - q1);
    const double w12 = w1 * w2;
    Matrix h = Matrix::Zero(2 * d, 2 * d);
    h.topLeftCorner(d, d) = w1 * Matrix::Identity(d, d) - w12 * (a * a.transpose());
    h.bottomRightCorner(d, d) = w2 * Matrix::Identity(d, d) - w12 * (b * b.transpose());
    h.topRightCorner(d, d) = w12 * (a * b.transpose());
    h.bottomLeftCorner(d, d) = h.topRightCorner(d, d).transpose();
    return h;
}

// ---- parallel kernels ----

double risk(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    const auto n = data.n();
    const BlockPlan plan = scalar_plan(n);
    double total = 0.0;
    switch (spec.family) {
        case Family::classification: {
            total = blocked_reduce(plan, 0.0, [&](std::size_t b0, std::size_t b1) {
                const auto bn = static_cast<Eigen::Index>(b1 - b0);
                const ParamVec u = data.features.middleRows(static_cast<Eigen::Index>(b0), bn) * theta;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < bn; ++i) {
                    const double r = spec.activation.value(u[i]) - data.responses[static_cast<Eigen::Index>(b0) + i];
                    acc += r * r;
                }
                return acc;
            });
            break;
        }
        case Family::robust_regression: {
            total = blocked_reduce(plan, 0.0, [&](std::size_t b0, std::size_t b1) {
                const auto bn = static_cast<Eigen::Index>(b1 - b0);
                const auto i0 = static_cast<Eigen::Index>(b0);
                const ParamVec u = data.features.middleRows(i0, bn) * theta;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < bn; ++i) acc += spec.loss.rho(data.responses[i0 + i] - u[i]);
                return acc;
            });
            break;
        }
        case Family::gmm2: {
            const GmmViews v = gmm_views(theta);
            total = blocked_reduce(plan, 0.0, [&](std::size_t b0, std::size_t b1) {
                double acc = 0.0;
                for (std::size_t i = b0; i < b1; ++i)
                    acc += gmm_loss_at(v, data.features.row(static_cast<Eigen::Index>(i)));
                return acc;
            });
            break;
        }
    }
    return total / static_cast<double>(n);
}

ParamVec gradient(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    const auto n = data.n();
    const BlockPlan plan = scalar_plan(n);
    const ParamVec zero = ParamVec::Zero(theta.size());
    ParamVec total;
    switch (spec.family) {
        case Family::classification:
        case Family::robust_regression: {
            const bool cls = spec.family == Family::classification;
            total = blocked_reduce(plan, zero, [&](std::size_t b0, std::size_t b1) -> ParamVec {
                const auto bn = static_cast<Eigen::Index>(b1 - b0);
                const auto i0 = static_cast<Eigen::Index>(b0);
                const auto Xb = data.features.middleRows(i0, bn);
                const ParamVec u = Xb * theta;
                ParamVec alpha(bn);
                for (Eigen::Index i = 0; i < bn; ++i) {
                    const double y = data.responses[i0 + i];
                    alpha[i] = cls ? classification_terms(spec.activation, u[i], y).alpha
                                   : regression_terms(spec.loss, y - u[i]).alpha;
                }
                return Xb.transpose() * alpha;
            });
            break;
        }
        case Family::gmm2: {
            const GmmViews v = gmm_views(theta);
            const Eigen::Index d = v.d;
            total = blocked_reduce(plan, zero, [&](std::size_t b0, std::size_t b1) -> ParamVec {
                ParamVec acc = ParamVec::Zero(2 * d);
                for (std::size_t ii = b0; ii < b1; ++ii) {
                    const auto z = data.features.row(static_cast<Eigen::Index>(ii)).transpose();
                    const double q1 = -0.5 * (z - v.th1).squaredNorm();
                    const double q2 = -0.5 * (z - v.th2).squaredNorm();
                    const double w1 = stable_logistic(q1 - q2);
                    const double w2 = stable_logistic(q2 - q1);
                    acc.head(d) += w1 * (v.th1 - z);
                    acc.tail(d) += w2 * (v.th2 - z);
                }
                return acc;
            });
            break;
        }
    }
    return total / static_cast<double>(n);
}

Matrix hessian(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    const auto n = data.n();
    const Eigen::Index p = theta.size();
    const BlockPlan plan = matrix_plan(n, p);
    const Matrix zero = Matrix::Zero(p, p);
    Matrix total;
    switch (spec.family) {
        case Family::classification:
        case Family::robust_regression: {
            const bool cls = spec.family == Family::classification;
            total = blocked_reduce(plan, zero, [&](std::size_t b0, std::size_t b1) -> Matrix {
                const auto bn = static_cast<Eigen::Index>(b1 - b0);
                const auto i0 = static_cast<Eigen::Index>(b0);
                const auto Xb = data.features.middleRows(i0, bn);
                const ParamVec u = Xb * theta;
                ParamVec beta(bn);
                for (Eigen::Index i = 0; i < bn; ++i) {
                    const double y = data.responses[i0 + i];
                    beta[i] = cls ? classification_terms(spec.activation, u[i], y).beta
                                  : regression_terms(spec.loss, y - u[i]).beta;
                }
                return Xb.transpose() * beta.asDiagonal() * Xb;
            });
            break;
        }
        case Family::gmm2: {
            const GmmViews v = gmm_views(theta);
            const Eigen::Index d = v.d;
            total = blocked_reduce(plan, zero, [&](std::size_t b0, std::size_t b1) -> Matrix {
                Matrix acc = Matrix::Zero(2 * d, 2 * d);
                double sw1 = 0.0, sw2 = 0.0;
                for (std::size_t ii = b0; ii < b1; ++ii) {
                    const auto z = data.features.row(static_cast<Eigen::Index>(ii)).transpose();
                    const ParamVec a = z - v.th1;
                    const ParamVec b = z - v.th2;
                    const double q1 = -0.5 * a.squaredNorm();
                    const double q2 = -0.5 * b.squaredNorm();
                    const double w1 = stable_logistic(q1 - q2);
                    const double w2 = stable_logistic(q2 - q1);
                    const double w12 = w1 * w2;
                    acc.topLeftCorner(d, d) -= w12 * (a * a.transpose());
                    acc.bottomRightCorner(d, d) -= w12 * (b * b.transpose());
                    acc.topRightCorner(d, d) += w12 * (a * b.transpose());
                    sw1 += w1;
                    sw2 += w2;
                }
                acc.topLeftCorner(d, d).diagonal().array() += sw1;
                acc.bottomRightCorner(d, d).diagonal().array() += sw2;
                acc.bottomLeftCorner(d, d) = acc.topRightCorner(d, d).transpose();
                return acc;
            });
            break;
        }
    }
    total /= static_cast<double>(n);
    return 0.5 * (total + total.transpose());
}

double per_sample_loss(const ModelSpec& spec, const Dataset& data, Eigen::Index i, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    if (i < 0 || i >= data.n()) throw InvalidInput("per_sample_loss: index out of range");
    switch (spec.family) {
        case Family::classification:
            return classification_terms(spec.activation, data.features.row(i) * theta, data.responses[i]).loss;
        case Family::robust_regression:
            return regression_terms(spec.loss, data.responses[i] - data.features.row(i) * theta).loss;
        case Family::gmm2:
            return gmm_loss_at(gmm_views(theta), data.features.row(i));
    }
    return 0.0;
}

ParamVec per_sample_grad(const ModelSpec& spec, const Dataset& data, Eigen::Index i, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    if (i < 0 || i >= data.n()) throw InvalidInput("per_sample_grad: index out of range");
    switch (spec.family) {
        case Family::classification: {
            const auto t = classification_terms(spec.activation, data.features.row(i) * theta, data.responses[i]);
            return t.alpha * data.features.row(i).transpose();
        }
        case Family::robust_regression: {
            const auto t = regression_terms(spec.loss, data.responses[i] - data.features.row(i) * theta);
            return t.alpha * data.features.row(i).transpose();
        }
        case Family::gmm2:
            return gmm_point_grad(theta, data.features.row(i).transpose());
    }
    return ParamVec();
}

// ---- serial reference ----

namespace ref {

double risk(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) acc += per_sample_loss(spec, data, i, theta);
    return acc / static_cast<double>(data.n());
}

ParamVec gradient(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    ParamVec acc = ParamVec::Zero(theta.size());
    for (Eigen::Index i = 0; i < data.n(); ++i) acc += per_sample_grad(spec, data, i, theta);
    return acc / static_cast<double>(data.n());
}

Matrix hessian(const ModelSpec& spec, const Dataset& data, const ParamVec& theta) {
    check_inputs(spec, data, theta);
    const Eigen::Index p = theta.size();
    Matrix acc = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        switch (spec.family) {
            case Family::classification: {
                const auto x = data.features.row(i).transpose();
                const auto t = classification_terms(spec.activation, data.features.row(i) * theta,
                                                    data.responses[i]);
                acc += t.beta * (x * x.transpose());
                break;
            }
            case Family::robust_regression: {
                const auto x = data.features.row(i).transpose();
                const auto t = regression_terms(spec.loss, data.responses[i] - data.features.row(i) * theta);
                acc += t.beta * (x * x.transpose());
                break;
            }
            case Family::gmm2:
                acc += gmm_point_hess(theta, data.features.row(i).transpose());
                break;
        }
    }
    acc /= static_cast<double>(data.n());
    return 0.5 * (acc + acc.transpose());
}

}  // namespace ref

}  // namespace riskscape
