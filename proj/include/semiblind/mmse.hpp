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

// Source estimation. In the frequency domain every block of the LMMSE
// operator C_sx C_x^{-1} is diagonal, so the estimate reduces to one M x L
// Wiener filter per bin:
//   s_hat[k] = diag(P[k]) A^T C_k^{-1} x[k].

#include "semiblind/likelihood.hpp"

#include <limits>

namespace semiblind
{
    struct SourceEstimate
    {
        TimeSeriesBlock sources;     // M x T
        FrequencyObservations freq;  // retained bins of the estimate
        ModelParams params_used;
    };

    struct MsePrediction
    {
        Vector per_source; // average over the T-bin conjugate extension
        Matrix per_bin;    // M x (T/2+1)
    };

    /// W_k = diag(P[k]) A^T C_k^{-1}, one M x L matrix per retained bin.
    /// A source with zero power at bin k gets a zero row. Estimated noise
    /// variances may be slightly negative; only C_k > 0 is required.
    inline std::vector<Matrix> lmmse_filter_bins(const ModelParams &params, const SourceSpectra &spectra)
    {
        detail::check_shapes(params, spectra);
        detail::check_finite(params);
        std::vector<Matrix> filters;
        filters.reserve(static_cast<std::size_t>(spectra.bins()));
        for (Index k = 0; k < spectra.bins(); ++k)
        {
            const auto p = spectra.bin(k);
            const Matrix inv = detail::bin_inverse(params.mixing, p, params.noise, nullptr, k);
            filters.push_back(p.asDiagonal() * params.mixing.transpose() * inv);
        }
        return filters;
    }

    inline SourceEstimate estimate_sources(const ModelParams &params, const FrequencyObservations &obs,
                                           const SourceSpectra &spectra)
    {
        detail::check_shapes(params, spectra);
        if (obs.channels() != params.sensors())
            throw DimensionError("observations have " + std::to_string(obs.channels()) + " channels, expected L=" +
                                 std::to_string(params.sensors()));
        if (obs.samples != spectra.samples())
            throw DimensionError("observations have T=" + std::to_string(obs.samples) + ", spectra have T=" +
                                 std::to_string(spectra.samples()));
        const std::vector<Matrix> filters = lmmse_filter_bins(params, spectra);
        SourceEstimate est;
        est.params_used = params;
        est.freq.samples = obs.samples;
        est.freq.alpha = obs.alpha;
        est.freq.bins.resize(params.sources(), obs.bin_count());
        for (Index k = 0; k < obs.bin_count(); ++k)
            est.freq.bins.col(k) = filters[static_cast<std::size_t>(k)].cast<std::complex<double>>() * obs.bins.col(k);
        est.sources = dft_inverse(est.freq);
        return est;
    }

    namespace detail
    {
        inline Vector average_over_extension(const Matrix &per_bin, Index samples)
        {
            const Vector alpha = bin_weights(samples);
            return 2.0 * (per_bin * alpha) / static_cast<double>(samples);
        }
    } // namespace detail

    /// Per-source MSE of the bin-wise filter built from `assumed`, applied to
    /// data generated by `truth`:
    ///   E|W x - s|^2 = sum_j |(W A - I)_mj|^2 P_j + sum_l W_ml^2 lambda_l.
    /// With assumed == truth this is the oracle bound P_m - P_m^2 (A^T C_k^{-1} A)_mm.
    inline MsePrediction mse_prediction(const ModelParams &assumed, const ModelParams &truth,
                                        const SourceSpectra &spectra)
    {
        detail::check_shapes(assumed, spectra);
        detail::check_shapes(truth, spectra);
        truth.validate(true);
        if (assumed.mixing.rows() != truth.mixing.rows())
            throw DimensionError("assumed and true parameters have different sensor counts");

        const Index M = truth.sources();
        const Index K = spectra.bins();
        const bool matched = assumed.mixing == truth.mixing && assumed.noise == truth.noise;
        const std::vector<Matrix> filters = lmmse_filter_bins(assumed, spectra);

        MsePrediction out;
        out.per_bin.resize(M, K);
        for (Index k = 0; k < K; ++k)
        {
            const auto p = spectra.bin(k);
            const Matrix &w = filters[static_cast<std::size_t>(k)];
            if (matched)
            {
                // diag(P) A^T C^{-1} A diag(P) = W A diag(P)
                const Matrix wa = w * truth.mixing;
                for (Index m = 0; m < M; ++m)
                    out.per_bin(m, k) = std::max(p[m] - wa(m, m) * p[m], 0.0);
                continue;
            }
            Matrix err = w * truth.mixing;
            err.diagonal().array() -= 1.0;
            out.per_bin.col(k) = err.cwiseAbs2() * p + w.cwiseAbs2() * truth.noise;
        }
        out.per_source = detail::average_over_extension(out.per_bin, spectra.samples());
        return out;
    }

    /// Oracle (L)MMSE bound per source.
    inline MsePrediction mmse_bound(const ModelParams &truth, const SourceSpectra &spectra)
    {
        return mse_prediction(truth, truth, spectra);
    }

    /// Memoryless pinv(A_hat) X.
    inline TimeSeriesBlock maximally_separating_demix(const Matrix &mixing, const TimeSeriesBlock &x)
    {
        if (mixing.rows() != x.rows())
            throw DimensionError("mixing estimate has " + std::to_string(mixing.rows()) + " rows but the data has " +
                                 std::to_string(x.rows()) + " channels");
        Eigen::JacobiSVD<Matrix> svd(mixing, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector sv = svd.singularValues();
        const double tol = std::max(mixing.rows(), mixing.cols()) * std::numeric_limits<double>::epsilon() *
                           (sv.size() ? sv[0] : 0.0);
        Index rank = 0;
        for (Index i = 0; i < sv.size(); ++i)
            rank += sv[i] > tol ? 1 : 0;
        if (rank < mixing.cols())
        {
            const Vector null_dir = svd.matrixV().col(mixing.cols() - 1);
            std::string dir;
            for (Index m = 0; m < null_dir.size(); ++m)
                dir += (m ? ", " : "") + std::to_string(null_dir[m]);
            throw NumericalError("mixing estimate is not full column rank (rank " + std::to_string(rank) + " < M=" +
                                 std::to_string(mixing.cols()) + "); null-space direction of its columns: [" +
                                 dir + "]");
        }
        const Matrix pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
        return pinv * x;
    }

} // namespace semiblind
