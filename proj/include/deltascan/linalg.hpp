// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace deltascan::linalg
{
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Mat = Matrix<float>;
using Vec = Vector<float>;
using RowVec = RowVector<float>;

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x)
{
    return x.cwiseMax(typename Derived::Scalar(0));
}

template <class Derived>
auto leaky_relu(const Eigen::ArrayBase<Derived>& x, typename Derived::Scalar slope)
{
    using S = typename Derived::Scalar;
    return x.max(S(0)) + slope * x.min(S(0));
}

/// Exponential-linear unit with unit scale.
template <class Derived>
auto elu(const Eigen::ArrayBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    return x.max(S(0)) + (x.min(S(0)).exp() - S(1));
}

/// Numerically stable softmax of a vector expression.
template <class Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    const S m = x.maxCoeff();
    Vector<S> e = (x.array() - m).exp().matrix();
    return e / e.sum();
}

/// In-place row-wise layer normalization with affine gain and bias.
template <class Derived, class G, class B>
void layer_norm_rows(Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<G>& gain,
    const Eigen::MatrixBase<B>& bias, typename Derived::Scalar eps = 1e-5f)
{
    using S = typename Derived::Scalar;
    const auto d = static_cast<S>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
    {
        auto row = x.row(i);
        const S mean = row.sum() / d;
        row.array() -= mean;
        const S var = row.squaredNorm() / d;
        row *= S(1) / std::sqrt(var + eps);
        row.array() = row.array() * gain.transpose().array() + bias.transpose().array();
    }
}

template <class A, class B>
typename A::Scalar euclidean(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b)
{
    return (a - b).norm();
}

}  // namespace deltascan::linalg
