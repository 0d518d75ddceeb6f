#pragma once

#include <cmath>
#include <string>

#include "abcglm/errors.hpp"
#include "abcglm/types.hpp"

namespace abcglm {

enum class DistanceKind { euclidean, mahalanobis };

inline std::string to_string(DistanceKind kind) {
    return kind == DistanceKind::euclidean ? "euclidean" : "mahalanobis";
}

inline DistanceKind distance_kind_from_string(const std::string& name) {
    if (name == "euclidean") return DistanceKind::euclidean;
    if (name == "mahalanobis") return DistanceKind::mahalanobis;
    throw ValidationError("unknown distance kind: " + name);
}

struct DistanceSpec {
    DistanceKind kind = DistanceKind::euclidean;
    Matrix covariance;  // required for mahalanobis; SPD

    static DistanceSpec euclidean() { return {DistanceKind::euclidean, Matrix()}; }
    static DistanceSpec mahalanobis(Matrix cov) {
        return {DistanceKind::mahalanobis, std::move(cov)};
    }
};

/// Prepared distance: factorizes the covariance once for mahalanobis.
class DistanceFn {
public:
    explicit DistanceFn(const DistanceSpec& spec) : kind_(spec.kind) {
        if (kind_ == DistanceKind::mahalanobis) {
            if (spec.covariance.rows() == 0 || spec.covariance.rows() != spec.covariance.cols())
                throw ValidationError("mahalanobis distance: covariance must be square");
            if (!spec.covariance.isApprox(spec.covariance.transpose(), 1e-10))
                throw ValidationError("mahalanobis distance: covariance must be symmetric");
            llt_.compute(spec.covariance);
            if (llt_.info() != Eigen::Success ||
                llt_.matrixLLT().diagonal().minCoeff() <= 0.0)
                throw NumericalError("mahalanobis distance: covariance is not positive definite");
        }
    }

    DistanceKind kind() const { return kind_; }

    double operator()(const Vector& s, const Vector& s_obs) const {
        if (s.size() != s_obs.size())
            throw ValidationError("distance: dimension mismatch");
        const Vector diff = s - s_obs;
        if (kind_ == DistanceKind::euclidean) return diff.norm();
        // sqrt(diff^T Sigma^{-1} diff) = |L^{-1} diff| with Sigma = L L^T.
        return llt_.matrixL().solve(diff).norm();
    }

private:
    DistanceKind kind_;
    Eigen::LLT<Matrix> llt_;
};

struct PcaProjection {
    Vector mean;          // n
    Matrix basis;         // k x n, rows orthonormal
    Vector eigenvalues;   // k, descending, >= 0
    double retained_variance_fraction = 1.0;
    int effective_k = 0;  // components kept after dropping zero-variance directions

    Vector project(const Vector& s) const { return basis * (s - mean); }

    /// Projection scaled to unit variance per component.
    Vector whiten(const Vector& s) const {
        Vector z = project(s);
        for (int i = 0; i < z.size(); ++i) z[i] /= std::sqrt(eigenvalues[i]);
        return z;
    }
};

/// PCA of sample covariance; stats rows are observations. Rank-deficient
/// directions (eigenvalue <= 1e-12 of the largest) are dropped from k.
inline PcaProjection fit_pca(const Matrix& stats, int k) {
    const auto N = stats.rows();
    const auto n = stats.cols();
    if (N <= n) throw ValidationError("fit_pca: sample size must exceed dimension");
    if (k < 1 || k > n) throw ValidationError("fit_pca: k out of range");

    PcaProjection pca;
    pca.mean = stats.colwise().mean();
    const Matrix centered = stats.rowwise() - pca.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(N - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("fit_pca: eigendecomposition failed");

    // SelfAdjointEigenSolver sorts ascending; flip to descending, clip noise negatives.
    Vector all_values(n);
    Matrix all_vectors(n, n);
    for (int i = 0; i < n; ++i) {
        all_values[i] = std::max(eig.eigenvalues()[n - 1 - i], 0.0);
        all_vectors.col(i) = eig.eigenvectors().col(n - 1 - i);
    }

    const double cutoff = all_values[0] * 1e-12;
    int positive = 0;
    while (positive < n && all_values[positive] > cutoff) ++positive;
    if (positive == 0) throw NumericalError("fit_pca: covariance has no positive eigenvalues");

    pca.effective_k = std::min(k, positive);
    pca.eigenvalues = all_values.head(pca.effective_k);
    pca.basis = all_vectors.leftCols(pca.effective_k).transpose();
    pca.retained_variance_fraction = pca.eigenvalues.sum() / all_values.sum();
    return pca;
}

}  // namespace abcglm
