// SPDX-License-Identifier: Apache-2.0
//
// semiblind: ML-based MMSE separation of stationary sources from noisy mixtures
// Copyright (C) 2026 The semiblind authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Frequency-domain Gaussian (quasi-)likelihood of theta = [vec(A); lambda].
//
// Bin k of the mixtures is modelled as zero-mean with covariance
//   C_k = A diag(P[k]) A^T + diag(lambda),
// complex circular for 0 < k < T/2 and real at k = 0, T/2. Up to constants,
//   L(theta) = sum_k alpha_k (log det C_k^{-1} - Tr(Re{x_k x_k^H} C_k^{-1})).

#include "semiblind/signal_model.hpp"

namespace semiblind
{
    /// Re{x[k] x[k]^H} for every retained bin, with the bin weights.
    struct SampleMoments
    {
        std::vector<Matrix> real_part;
        Vector alpha;

        Index bin_count() const noexcept { return static_cast<Index>(real_part.size()); }
    };

    inline SampleMoments sample_moments(const FrequencyObservations &obs)
    {
        SampleMoments m;
        m.alpha = obs.alpha;
        m.real_part.reserve(static_cast<std::size_t>(obs.bin_count()));
        for (Index k = 0; k < obs.bin_count(); ++k)
        {
            const Vector re = obs.bins.col(k).real();
            const Vector im = obs.bins.col(k).imag();
            m.real_part.push_back(re * re.transpose() + im * im.transpose());
        }
        return m;
    }

    namespace detail
    {
        inline constexpr double kWoodburyPowerFloor = 1e-12;

        inline void check_shapes(const ModelParams &params, const SourceSpectra &spectra)
        {
            if (params.noise.size() != params.mixing.rows())
                throw DimensionError("noise vector has length " + std::to_string(params.noise.size()) +
                                     ", expected L=" + std::to_string(params.mixing.rows()));
            if (params.mixing.cols() != spectra.sources())
                throw DimensionError("mixing matrix has " + std::to_string(params.mixing.cols()) +
                                     " columns but " + std::to_string(spectra.sources()) + " spectra were given");
        }

        inline void check_finite(const ModelParams &params)
        {
            if (!params.mixing.allFinite() || !params.noise.allFinite())
                throw ValidationError("model parameters must be finite");
        }

        inline void check_moments(const ModelParams &params, const SampleMoments &moments, const SourceSpectra &spectra)
        {
            check_shapes(params, spectra);
            if (moments.bin_count() != spectra.bins() || moments.alpha.size() != spectra.bins())
                throw DimensionError("observations hold " + std::to_string(moments.bin_count()) +
                                     " bins but the spectra imply " + std::to_string(spectra.bins()));
            if (moments.bin_count() > 0 && moments.real_part.front().rows() != params.mixing.rows())
                throw DimensionError("observations have " + std::to_string(moments.real_part.front().rows()) +
                                     " channels, expected L=" + std::to_string(params.mixing.rows()));
        }

        // Inverse and log-determinant of A diag(p) A^T + diag(lambda).
        inline Matrix bin_inverse(const Matrix &mixing, const Eigen::Ref<const Vector> &power, const Vector &noise,
                                  double *log_det, Index bin)
        {
            const Index L = mixing.rows();
            const Index M = mixing.cols();
            const bool woodbury = M < L && power.minCoeff() > kWoodburyPowerFloor && noise.minCoeff() > 0.0;
            if (woodbury)
            {
                const Vector inv_noise = noise.cwiseInverse();
                const Matrix scaled = inv_noise.asDiagonal() * mixing; // Lambda^{-1} A
                Matrix inner = mixing.transpose() * scaled;
                inner.diagonal() += power.cwiseInverse();
                Eigen::LLT<Matrix> llt(inner);
                if (llt.info() != Eigen::Success)
                    throw NumericalError("inner Woodbury system is singular at bin " + std::to_string(bin), bin);
                Matrix inv = -scaled * llt.solve(scaled.transpose());
                inv.diagonal() += inv_noise;
                if (log_det)
                    *log_det = noise.array().log().sum() + power.array().log().sum() +
                               2.0 * llt.matrixLLT().diagonal().array().log().sum();
                return inv;
            }
            Matrix cov = mixing * power.asDiagonal() * mixing.transpose();
            cov.diagonal() += noise;
            Eigen::LLT<Matrix> llt(cov);
            if (llt.info() != Eigen::Success)
                throw NumericalError("model covariance is not positive definite at bin " + std::to_string(bin), bin);
            if (log_det)
                *log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
            return llt.solve(Matrix::Identity(L, L));
        }
    } // namespace detail

    /// C_k, C_k^{-1} and log det C_k for every retained bin.
    struct PerFrequencyCovariance
    {
        std::vector<Matrix> cov;
        std::vector<Matrix> inv;
        Vector log_det;

        /// Column l of C_k^{-1}.
        auto xi(Index k, Index l) const { return inv[static_cast<std::size_t>(k)].col(l); }
    };

    inline Matrix model_covariance(const ModelParams &params, const Eigen::Ref<const Vector> &power)
    {
        Matrix cov = params.mixing * power.asDiagonal() * params.mixing.transpose();
        cov.diagonal() += params.noise;
        return cov;
    }

    /// C_k^{-1} = Lambda^{-1} - Lambda^{-1} A (P_k^{-1} + A^T Lambda^{-1} A)^{-1} A^T Lambda^{-1}.
    /// Bins with a (near) zero source power, or M = L, fall back to a dense factorization.
    inline Matrix woodbury_inverse(const ModelParams &params, const Eigen::Ref<const Vector> &power)
    {
        if (power.size() != params.mixing.cols())
            throw DimensionError("spectrum slice has " + std::to_string(power.size()) + " entries, expected M=" +
                                 std::to_string(params.mixing.cols()));
        params.validate();
        return detail::bin_inverse(params.mixing, power, params.noise, nullptr, -1);
    }

    /// C_k, C_k^{-1} and log det C_k for k = 0..T/2. Only positive
    /// definiteness of each C_k is required; a failing bin is reported by index.
    inline PerFrequencyCovariance model_covariances(const ModelParams &params, const SourceSpectra &spectra)
    {
        detail::check_shapes(params, spectra);
        detail::check_finite(params);
        const Index K = spectra.bins();
        PerFrequencyCovariance out;
        out.cov.reserve(static_cast<std::size_t>(K));
        out.inv.reserve(static_cast<std::size_t>(K));
        out.log_det.resize(K);
        for (Index k = 0; k < K; ++k)
        {
            out.cov.push_back(model_covariance(params, spectra.bin(k)));
            out.inv.push_back(detail::bin_inverse(params.mixing, spectra.bin(k), params.noise, &out.log_det[k], k));
        }
        return out;
    }

    inline double log_likelihood(const ModelParams &params, const SampleMoments &moments, const SourceSpectra &spectra)
    {
        detail::check_moments(params, moments, spectra);
        detail::check_finite(params);
        double total = 0.0;
        for (Index k = 0; k < moments.bin_count(); ++k)
        {
            double log_det = 0.0;
            const Matrix inv = detail::bin_inverse(params.mixing, spectra.bin(k), params.noise, &log_det, k);
            const double quad = (moments.real_part[static_cast<std::size_t>(k)].cwiseProduct(inv)).sum();
            total += moments.alpha[k] * (-log_det - quad);
        }
        return total;
    }

    inline double log_likelihood(const ModelParams &params, const FrequencyObservations &obs,
                                 const SourceSpectra &spectra)
    {
        return log_likelihood(params, sample_moments(obs), spectra);
    }

    /// Analytic gradient of log_likelihood, ordered as [vec(A); lambda]:
    ///   dL/dA      = 2 sum_k alpha_k D_k A diag(P[k]),
    ///   dL/dlambda = sum_k alpha_k diag(D_k),
    /// with D_k = C_k^{-1} Re{X[k]} C_k^{-1} - C_k^{-1}.
    inline Vector score(const ModelParams &params, const SampleMoments &moments, const SourceSpectra &spectra)
    {
        detail::check_moments(params, moments, spectra);
        detail::check_finite(params);
        const Index L = params.sensors();
        const Index M = params.sources();
        Matrix grad_mixing = Matrix::Zero(L, M);
        Vector grad_noise = Vector::Zero(L);
        for (Index k = 0; k < moments.bin_count(); ++k)
        {
            const Matrix inv = detail::bin_inverse(params.mixing, spectra.bin(k), params.noise, nullptr, k);
            Matrix d = inv * moments.real_part[static_cast<std::size_t>(k)] * inv - inv;
            const double a = moments.alpha[k];
            grad_mixing.noalias() += (2.0 * a) * (d * params.mixing) * spectra.bin(k).asDiagonal();
            grad_noise += a * d.diagonal();
        }
        Vector g(L * M + L);
        g.head(L * M) = grad_mixing.reshaped();
        g.tail(L) = grad_noise;
        return g;
    }

    inline Vector score(const ModelParams &params, const FrequencyObservations &obs, const SourceSpectra &spectra)
    {
        return score(params, sample_moments(obs), spectra);
    }

    /// Max-norm of the score; zero exactly at a solution of the likelihood equations.
    inline double likelihood_equations_residual(const ModelParams &params, const SampleMoments &moments,
                                                const SourceSpectra &spectra)
    {
        return score(params, moments, spectra).cwiseAbs().maxCoeff();
    }

    inline double likelihood_equations_residual(const ModelParams &params, const FrequencyObservations &obs,
                                                const SourceSpectra &spectra)
    {
        return likelihood_equations_residual(params, sample_moments(obs), spectra);
    }

    /// Moments equal to the model covariances at params; the score vanishes there.
    inline SampleMoments population_moments(const ModelParams &params, const SourceSpectra &spectra)
    {
        SampleMoments m;
        m.alpha = bin_weights(spectra.samples());
        for (Index k = 0; k < spectra.bins(); ++k)
            m.real_part.push_back(model_covariance(params, spectra.bin(k)));
        return m;
    }

} // namespace semiblind
