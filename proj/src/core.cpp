#include "mib/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

namespace mib {

namespace {

std::vector<double> gather_row(const Matrix& values, Index row, const std::vector<Index>& cols) {
    std::vector<double> obs(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) obs[k] = values(row, cols[k]);
    return obs;
}

} // namespace

// ---------------------------------------------------------------------------

Dataset::Dataset(Matrix values, std::vector<std::string> columns)
    : values_(std::move(values)), columns_(std::move(columns)) {
    if (values_.rows() < 1) throw DimensionError("dataset needs at least one observation");
    if (values_.cols() < 1) throw DimensionError("dataset needs at least one column");
    if (static_cast<Index>(columns_.size()) != values_.cols()) {
        throw DimensionError("dataset has " + std::to_string(values_.cols()) + " columns but " +
                             std::to_string(columns_.size()) + " names");
    }
    std::set<std::string> seen;
    for (const auto& c : columns_) {
        if (!seen.insert(c).second) throw DimensionError("duplicate column name '" + c + "'");
    }
    for (Index j = 0; j < values_.cols(); ++j) {
        for (Index i = 0; i < values_.rows(); ++i) {
            if (!std::isfinite(values_(i, j))) {
                throw Error("non-finite value in column '" + columns_[j] + "', row " +
                            std::to_string(i + 1));
            }
        }
    }
}

Index Dataset::column_index(const std::string& name) const {
    auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) throw DimensionError("dataset has no column '" + name + "'");
    return static_cast<Index>(it - columns_.begin());
}

// ---------------------------------------------------------------------------

ThetaBox::ThetaBox(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() < 1) throw DimensionError("parameter box needs dimension >= 1");
    if (lower_.size() != upper_.size()) throw DimensionError("box bounds differ in length");
    for (Index j = 0; j < lower_.size(); ++j) {
        if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]) || !(lower_[j] < upper_[j])) {
            throw Error("box coordinate " + std::to_string(j) + " needs finite lower < upper");
        }
    }
}

bool ThetaBox::contains(const Vector& theta) const {
    if (theta.size() != dim()) throw DimensionError("theta length does not match box dimension");
    for (Index j = 0; j < dim(); ++j) {
        if (!(theta[j] >= lower_[j] && theta[j] <= upper_[j])) return false;
    }
    return true;
}

double ThetaBox::log_volume() const { return (upper_ - lower_).array().log().sum(); }

Vector ThetaBox::clamp(const Vector& theta) const { return theta.cwiseMax(lower_).cwiseMin(upper_); }

ThetaBox ThetaBox::slice(std::span<const int> coords) const {
    return ThetaBox(take(lower_, coords), take(upper_, coords));
}

// ---------------------------------------------------------------------------

MomentModel MomentModel::affine(std::string name, Index p, Index d, std::vector<std::string> columns,
                                AffineExtractor extract) {
    if (p < 1 || d < 1) throw DimensionError("moment model needs p >= 1 and d >= 1");
    MomentModel m;
    m.name_ = std::move(name);
    m.p_ = p;
    m.d_ = d;
    m.kind_ = Kind::affine;
    m.columns_ = std::move(columns);
    m.extract_ = std::move(extract);
    return m;
}

MomentModel MomentModel::generic(std::string name, Index p, Index d, std::vector<std::string> columns,
                                 Evaluator evaluate) {
    if (p < 1 || d < 1) throw DimensionError("moment model needs p >= 1 and d >= 1");
    MomentModel m;
    m.name_ = std::move(name);
    m.p_ = p;
    m.d_ = d;
    m.kind_ = Kind::generic;
    m.columns_ = std::move(columns);
    m.evaluate_ = std::move(evaluate);
    return m;
}

Vector MomentModel::evaluate(std::span<const double> obs, const Vector& theta) const {
    if (theta.size() != d_) throw DimensionError("theta has length " + std::to_string(theta.size()) +
                                                 ", model expects " + std::to_string(d_));
    if (kind_ == Kind::affine) return affine_terms(obs)(theta);
    Vector out(p_);
    evaluate_(obs, theta, out);
    return out;
}

AffineTerms MomentModel::affine_terms(std::span<const double> obs) const {
    if (kind_ != Kind::affine) throw Error("model '" + name_ + "' is not affine");
    AffineTerms t{Matrix::Zero(p_, d_), Vector::Zero(p_)};
    extract_(obs, t.A, t.b);
    return t;
}

std::vector<Index> MomentModel::bind(const Dataset& data) const {
    std::vector<Index> idx;
    idx.reserve(columns_.size());
    for (const auto& c : columns_) idx.push_back(data.column_index(c));
    return idx;
}

AffineTerms average_affine_terms(const MomentModel& model, const Dataset& data) {
    const auto cols = model.bind(data);
    AffineTerms avg{Matrix::Zero(model.p(), model.d()), Vector::Zero(model.p())};
    for (Index i = 0; i < data.n(); ++i) {
        const auto t = model.affine_terms(gather_row(data.values(), i, cols));
        avg.A += t.A;
        avg.b += t.b;
    }
    const double inv_n = 1.0 / static_cast<double>(data.n());
    avg.A *= inv_n;
    avg.b *= inv_n;
    return avg;
}

Vector sample_moment_mean(const MomentModel& model, const Dataset& data, const Vector& theta) {
    if (theta.size() != model.d()) {
        throw DimensionError("theta has length " + std::to_string(theta.size()) + ", model expects " +
                             std::to_string(model.d()));
    }
    for (Index j = 0; j < theta.size(); ++j) {
        if (!std::isfinite(theta[j])) throw Error("theta must be finite");
    }
    if (model.is_affine()) return average_affine_terms(model, data)(theta);

    const auto cols = model.bind(data);
    Vector sum = Vector::Zero(model.p());
    for (Index i = 0; i < data.n(); ++i) sum += model.evaluate(gather_row(data.values(), i, cols), theta);
    return sum / static_cast<double>(data.n());
}

// ---------------------------------------------------------------------------
// Builders

MomentModel make_bounds_model(std::vector<Bound> bounds) {
    if (bounds.empty()) throw DimensionError("bounds model needs at least one bound");
    std::vector<std::string> columns;
    std::vector<int> source;   // position of each bound's column in `columns`
    std::vector<double> sign;  // +1 for upper (y - theta), -1 for lower (theta - y)
    for (const auto& bd : bounds) {
        auto it = std::find(columns.begin(), columns.end(), bd.column);
        if (it == columns.end()) {
            columns.push_back(bd.column);
            it = columns.end() - 1;
        }
        source.push_back(static_cast<int>(it - columns.begin()));
        sign.push_back(bd.side == BoundSide::upper ? 1.0 : -1.0);
    }
    const auto p = static_cast<Index>(bounds.size());
    return MomentModel::affine("bounds", p, 1, columns,
                               [source, sign](std::span<const double> obs, Eigen::Ref<Matrix> A,
                                              Eigen::Ref<Vector> b) {
                                   for (std::size_t j = 0; j < source.size(); ++j) {
                                       A(static_cast<Index>(j), 0) = -sign[j];
                                       b[static_cast<Index>(j)] = sign[j] * obs[source[j]];
                                   }
                               });
}

MomentModel make_interval_mean_model() {
    return MomentModel::affine("interval-mean", 2, 1, {"y1", "y2"},
                               [](std::span<const double> obs, Eigen::Ref<Matrix> A, Eigen::Ref<Vector> b) {
                                   A(0, 0) = -1.0;
                                   b[0] = obs[1];
                                   A(1, 0) = 1.0;
                                   b[1] = -obs[0];
                               });
}

MomentModel make_missing_data_model() {
    return MomentModel::affine("missing-data", 2, 1, {"zy", "z"},
                               [](std::span<const double> obs, Eigen::Ref<Matrix> A, Eigen::Ref<Vector> b) {
                                   const double zy = obs[0];
                                   const double z = obs[1];
                                   A(0, 0) = 1.0;
                                   b[0] = -zy;
                                   A(1, 0) = -1.0;
                                   b[1] = zy + 1.0 - z;
                               });
}

MomentModel make_interval_regression_model(int num_instruments, int num_regressors) {
    if (num_instruments < 1 || num_regressors < 1) {
        throw DimensionError("interval regression needs at least one instrument and one regressor");
    }
    std::vector<std::string> cols{"y1", "y2"};
    for (int k = 1; k <= num_regressors; ++k) cols.push_back("x" + std::to_string(k));
    for (int l = 1; l <= num_instruments; ++l) cols.push_back("z" + std::to_string(l));
    const int L = num_instruments;
    const int K = num_regressors;
    return MomentModel::affine(
        "interval-regression", 2 * L, K, std::move(cols),
        [L, K](std::span<const double> obs, Eigen::Ref<Matrix> A, Eigen::Ref<Vector> b) {
            const double y1 = obs[0];
            const double y2 = obs[1];
            for (int l = 0; l < L; ++l) {
                const double z = obs[2 + K + l];
                b[l] = z * y2;
                b[L + l] = -z * y1;
                for (int k = 0; k < K; ++k) {
                    const double x = obs[2 + k];
                    A(l, k) = -z * x;
                    A(L + l, k) = z * x;
                }
            }
        });
}

// ---------------------------------------------------------------------------

ThetaPrior::ThetaPrior(Kind kind, ThetaBox box, Vector mean, Vector sd)
    : kind_(kind), box_(std::move(box)), mean_(std::move(mean)), sd_(std::move(sd)) {}

ThetaPrior ThetaPrior::flat(ThetaBox box) {
    const auto d = box.dim();
    return ThetaPrior(Kind::flat, std::move(box), Vector::Zero(d), Vector::Zero(d));
}

ThetaPrior ThetaPrior::normal(Vector mean, Vector sd, ThetaBox box) {
    if (mean.size() != box.dim() || sd.size() != box.dim()) {
        throw DimensionError("normal prior mean/sd length must match the box dimension");
    }
    for (Index j = 0; j < sd.size(); ++j) {
        if (!(sd[j] > 0.0) || !std::isfinite(sd[j])) throw Error("prior standard deviations must be positive");
        if (!std::isfinite(mean[j])) throw Error("prior means must be finite");
    }
    return ThetaPrior(Kind::independent_normal, std::move(box), std::move(mean), std::move(sd));
}

double ThetaPrior::log_density(const Vector& theta) const {
    if (!box_.contains(theta)) return -std::numeric_limits<double>::infinity();
    if (kind_ == Kind::flat) return -box_.log_volume();
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double lp = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
        const double z = (theta[j] - mean_[j]) / sd_[j];
        lp += -0.5 * z * z - std::log(sd_[j]) - half_log_2pi;
    }
    return lp;
}

ThetaPrior ThetaPrior::marginal(std::span<const int> coords) const {
    return ThetaPrior(kind_, box_.slice(coords), take(mean_, coords), take(sd_, coords));
}

// ---------------------------------------------------------------------------

Hyperparameters::Hyperparameters(Vector psi, Matrix V) : psi_(std::move(psi)), V_(std::move(V)) {
    if (psi_.size() < 1) throw DimensionError("psi must have at least one component");
    if (V_.rows() != psi_.size() || V_.cols() != psi_.size()) {
        throw DimensionError("V must be " + std::to_string(psi_.size()) + "x" + std::to_string(psi_.size()));
    }
    for (Index i = 0; i < psi_.size(); ++i) {
        if (!(psi_[i] > 0.0) || !std::isfinite(psi_[i])) throw Error("psi components must be positive");
    }
    if (!V_.allFinite()) throw Error("V must be finite");
    if ((V_ - V_.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error("V must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(V_, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error("V must be positive definite");
}

Hyperparameters Hyperparameters::identity(Vector psi) {
    const auto p = psi.size();
    return Hyperparameters(std::move(psi), Matrix::Identity(p, p));
}

Hyperparameters Hyperparameters::subset(std::span<const int> moments) const {
    return Hyperparameters(take(psi_, moments), take(V_, moments, moments));
}

Vector take(const Vector& v, std::span<const int> idx) {
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= v.size()) throw DimensionError("index out of range");
        out[static_cast<Index>(k)] = v[idx[k]];
    }
    return out;
}

Matrix take(const Matrix& m, std::span<const int> rows, std::span<const int> cols) {
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (rows[r] < 0 || rows[r] >= m.rows() || cols[c] < 0 || cols[c] >= m.cols()) {
                throw DimensionError("index out of range");
            }
            out(static_cast<Index>(r), static_cast<Index>(c)) = m(rows[r], cols[c]);
        }
    }
    return out;
}

} // namespace mib
