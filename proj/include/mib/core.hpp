#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mib {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of inputs disagree (moment count vs. psi, theta length vs. model, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to reach its stated accuracy or hit an
/// impossible state (non-SPD matrix, bound violation, broken target).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// CSV ingestion failure. `row` is 1-based over data rows (0 for the header),
/// `column` is 1-based; both are 0 when the failure is not cell-specific.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(what), row_(row), column_(column) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

// ---------------------------------------------------------------------------
// Dataset

/// n observations of q named, finite variables. Rows are observations.
class Dataset {
public:
    Dataset(Matrix values, std::vector<std::string> columns);

    Index n() const noexcept { return values_.rows(); }
    Index q() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }

    /// Position of a named column; throws DimensionError if absent.
    Index column_index(const std::string& name) const;
    Vector column(const std::string& name) const { return values_.col(column_index(name)); }

private:
    Matrix values_;
    std::vector<std::string> columns_;
};

// ---------------------------------------------------------------------------
// Parameter space

/// Compact axis-aligned parameter space.
class ThetaBox {
public:
    ThetaBox(Vector lower, Vector upper);

    Index dim() const noexcept { return lower_.size(); }
    const Vector& lower() const noexcept { return lower_; }
    const Vector& upper() const noexcept { return upper_; }

    bool contains(const Vector& theta) const;
    double log_volume() const;
    Vector center() const { return 0.5 * (lower_ + upper_); }
    Vector clamp(const Vector& theta) const;

    /// Box restricted to the listed coordinates.
    ThetaBox slice(std::span<const int> coords) const;

private:
    Vector lower_;
    Vector upper_;
};

// ---------------------------------------------------------------------------
// Moment models

/// Per-observation affine coefficients: m(X_i, theta) = A theta + b.
struct AffineTerms {
    Matrix A; ///< p x d
    Vector b; ///< p

    Vector operator()(const Vector& theta) const { return A * theta + b; }
};

/// p moment functions m(X, theta) of a d-dimensional parameter. A model reads
/// a fixed list of named dataset columns; the callbacks receive the values of
/// those columns for one observation, in the order of `columns()`.
class MomentModel {
public:
    enum class Kind { affine, generic };

    using AffineExtractor =
        std::function<void(std::span<const double> obs, Eigen::Ref<Matrix> A, Eigen::Ref<Vector> b)>;
    using Evaluator =
        std::function<void(std::span<const double> obs, const Vector& theta, Eigen::Ref<Vector> out)>;

    static MomentModel affine(std::string name, Index p, Index d, std::vector<std::string> columns,
                              AffineExtractor extract);
    static MomentModel generic(std::string name, Index p, Index d, std::vector<std::string> columns,
                               Evaluator evaluate);

    const std::string& name() const noexcept { return name_; }
    Index p() const noexcept { return p_; }
    Index d() const noexcept { return d_; }
    Kind kind() const noexcept { return kind_; }
    bool is_affine() const noexcept { return kind_ == Kind::affine; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }

    Vector evaluate(std::span<const double> obs, const Vector& theta) const;
    AffineTerms affine_terms(std::span<const double> obs) const;

    /// Dataset column positions for `columns()`; throws if any is missing.
    std::vector<Index> bind(const Dataset& data) const;

private:
    MomentModel() = default;

    std::string name_;
    Index p_ = 0;
    Index d_ = 0;
    Kind kind_ = Kind::affine;
    std::vector<std::string> columns_;
    AffineExtractor extract_;
    Evaluator evaluate_;
};

/// Column-averaged affine coefficients (A-bar, b-bar) of an affine model.
AffineTerms average_affine_terms(const MomentModel& model, const Dataset& data);

/// m-bar(theta) = (1/n) sum_i m(X_i, theta).
Vector sample_moment_mean(const MomentModel& model, const Dataset& data, const Vector& theta);

/// m = (y2 - theta, theta - y1). Reads y1, y2.
MomentModel make_interval_mean_model();

/// m = (theta - zy, zy - theta + 1 - z). Reads zy, z.
MomentModel make_missing_data_model();

/// Instrumental interval regression with L instruments and K regressors.
/// Reads y1, y2, x1..xK, z1..zL. Moments 1..L are z_l (y2 - x'theta),
/// moments L+1..2L are z_l (x'theta - y1).
MomentModel make_interval_regression_model(int num_instruments, int num_regressors);

/// Scalar parameter bounded by observed variables. `upper` means the column
/// bounds theta from above (moment y - theta); `lower` from below
/// (moment theta - y).
enum class BoundSide { upper, lower };
struct Bound {
    std::string column;
    BoundSide side;
};
MomentModel make_bounds_model(std::vector<Bound> bounds);

// ---------------------------------------------------------------------------
// Priors and hyperparameters

/// Prior on theta truncated to a box. The normal kind uses independent
/// N(mean_j, sd_j^2) densities without renormalising for the truncation.
class ThetaPrior {
public:
    enum class Kind { flat, independent_normal };

    static ThetaPrior flat(ThetaBox box);
    static ThetaPrior normal(Vector mean, Vector sd, ThetaBox box);

    Kind kind() const noexcept { return kind_; }
    const ThetaBox& box() const noexcept { return box_; }
    const Vector& mean() const noexcept { return mean_; }
    const Vector& sd() const noexcept { return sd_; }
    Index dim() const noexcept { return box_.dim(); }

    /// -infinity outside the box.
    double log_density(const Vector& theta) const;

    /// Prior of the listed coordinates only.
    ThetaPrior marginal(std::span<const int> coords) const;

private:
    ThetaPrior(Kind kind, ThetaBox box, Vector mean, Vector sd);

    Kind kind_;
    ThetaBox box_;
    Vector mean_;
    Vector sd_;
};

/// Exponential-prior rates psi for the bias parameter and the fixed scale
/// matrix V of the limited information likelihood.
class Hyperparameters {
public:
    Hyperparameters(Vector psi, Matrix V);

    static Hyperparameters identity(Vector psi);

    Index p() const noexcept { return psi_.size(); }
    const Vector& psi() const noexcept { return psi_; }
    const Matrix& V() const noexcept { return V_; }

    Hyperparameters subset(std::span<const int> moments) const;

private:
    Vector psi_;
    Matrix V_;
};

/// Gathers rows/columns of a vector or symmetric matrix by index list.
Vector take(const Vector& v, std::span<const int> idx);
Matrix take(const Matrix& m, std::span<const int> rows, std::span<const int> cols);

} // namespace mib
