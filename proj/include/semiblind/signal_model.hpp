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

// Data model for X = A S + V: source spectra, synthetic generators and the
// normalized DFT with its real-bin bookkeeping.

#include "semiblind/types.hpp"

#include <unsupported/Eigen/FFT>

#include <cstdint>
#include <numbers>
#include <random>

namespace semiblind
{
    /// Power spectral density of one real stationary source sampled at the
    /// T bins 2*pi*k/T, k = 0..T-1. The mean over all bins is the variance.
    struct SpectralProfile
    {
        Vector values;

        Index samples() const noexcept { return values.size(); }
        double variance() const { return values.mean(); }

        void validate() const
        {
            const Index T = values.size();
            if (T < 4 || T % 2 != 0)
                throw DimensionError("spectral profile length must be an even integer >= 4 (got " +
                                     std::to_string(T) + ")");
            for (Index k = 0; k < T; ++k)
                if (!(values[k] >= 0.0) || !std::isfinite(values[k]))
                    throw ValidationError("spectral profile entry " + std::to_string(k) +
                                          " must be finite and nonnegative");
            for (Index k = 1; k < T / 2; ++k)
                if (std::abs(values[k] - values[T - k]) > 1e-9 * (1.0 + std::abs(values[k])))
                    throw ValidationError("spectral profile is not symmetric at bin " + std::to_string(k));
        }
    };

    /// The known spectra of all M sources, stored M x T.
    class SourceSpectra
    {
    public:
        SourceSpectra() = default;

        explicit SourceSpectra(const std::vector<SpectralProfile> &profiles)
        {
            if (profiles.empty())
                throw DimensionError("at least one source spectrum is required");
            const Index T = profiles.front().samples();
            power_.resize(static_cast<Index>(profiles.size()), T);
            for (std::size_t m = 0; m < profiles.size(); ++m)
            {
                profiles[m].validate();
                if (profiles[m].samples() != T)
                    throw DimensionError("source spectra have different lengths");
                power_.row(static_cast<Index>(m)) = profiles[m].values.transpose();
            }
        }

        Index sources() const noexcept { return power_.rows(); }
        Index samples() const noexcept { return power_.cols(); }
        Index bins() const noexcept { return power_.cols() / 2 + 1; }

        /// Per-source powers at bin k (0-based).
        auto bin(Index k) const { return power_.col(k); }
        const Matrix &power() const noexcept { return power_; }

        SpectralProfile profile(Index m) const { return {power_.row(m).transpose()}; }

    private:
        Matrix power_;
    };

    /// Weights of the retained bins: 1/2 on the two real bins (DC and Nyquist), 1 elsewhere.
    inline Vector bin_weights(Index samples)
    {
        Vector alpha = Vector::Ones(samples / 2 + 1);
        alpha[0] = 0.5;
        alpha[samples / 2] = 0.5;
        return alpha;
    }

    /// First T/2+1 normalized-DFT bins of every row of a real block.
    struct FrequencyObservations
    {
        CMatrix bins; // R x (T/2+1)
        Vector alpha; // bin weights
        Index samples = 0;

        Index channels() const noexcept { return bins.rows(); }
        Index bin_count() const noexcept { return bins.cols(); }
    };

    /// Normalized DFT, F_kt = T^{-1/2} exp(-j 2 pi k t / T), truncated to k = 0..T/2.
    inline FrequencyObservations dft_forward(const TimeSeriesBlock &x)
    {
        const Index T = x.cols();
        if (T < 2 || T % 2 != 0)
            throw DimensionError("DFT requires an even sample count (got T=" + std::to_string(T) + ")");
        if (!x.allFinite())
            throw ValidationError("time series contains non-finite samples");

        FrequencyObservations f;
        f.samples = T;
        f.alpha = bin_weights(T);
        f.bins.resize(x.rows(), T / 2 + 1);

        Eigen::FFT<double> fft;
        fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
        const double scale = 1.0 / std::sqrt(static_cast<double>(T));
        std::vector<double> row(static_cast<std::size_t>(T));
        std::vector<std::complex<double>> spectrum;
        for (Index r = 0; r < x.rows(); ++r)
        {
            for (Index t = 0; t < T; ++t)
                row[static_cast<std::size_t>(t)] = x(r, t);
            fft.fwd(spectrum, row);
            for (Index k = 0; k <= T / 2; ++k)
                f.bins(r, k) = spectrum[static_cast<std::size_t>(k)] * scale;
            // Real bins are exactly real for real input.
            f.bins(r, 0).imag(0.0);
            f.bins(r, T / 2).imag(0.0);
        }
        return f;
    }

    /// Conjugate-symmetric extension followed by the inverse normalized DFT.
    inline TimeSeriesBlock dft_inverse(const FrequencyObservations &f)
    {
        const Index T = f.samples;
        if (T < 2 || T % 2 != 0 || f.bins.cols() != T / 2 + 1)
            throw DimensionError("frequency observations do not hold T/2+1 bins for an even T");

        constexpr double tol = 1e-9;
        for (Index r = 0; r < f.bins.rows(); ++r)
            for (Index k : {Index{0}, T / 2})
                if (std::abs(f.bins(r, k).imag()) > tol * (1.0 + std::abs(f.bins(r, k).real())))
                    throw ValidationError("bin " + std::to_string(k) + " of channel " + std::to_string(r) +
                                          " must be real");

        TimeSeriesBlock x(f.bins.rows(), T);
        Eigen::FFT<double> fft;
        fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
        const double scale = std::sqrt(static_cast<double>(T));
        std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(T / 2 + 1));
        std::vector<double> row;
        for (Index r = 0; r < f.bins.rows(); ++r)
        {
            for (Index k = 0; k <= T / 2; ++k)
                spectrum[static_cast<std::size_t>(k)] = f.bins(r, k);
            spectrum.front().imag(0.0);
            spectrum.back().imag(0.0);
            fft.inv(row, spectrum, T);
            for (Index t = 0; t < T; ++t)
                x(r, t) = row[static_cast<std::size_t>(t)] * scale;
        }
        return x;
    }

    /// Spectrum of the unit-variance AR(1) process s[t] = a s[t-1] + e[t].
    inline SpectralProfile ar1_spectrum(double a, Index samples)
    {
        if (!(std::abs(a) < 1.0))
            throw ValidationError("AR(1) parameter must satisfy |a| < 1 (got " + std::to_string(a) + ")");
        if (samples < 4 || samples % 2 != 0)
            throw DimensionError("T must be an even integer >= 4 (got " + std::to_string(samples) + ")");
        SpectralProfile p;
        p.values.resize(samples);
        for (Index k = 0; k < samples; ++k)
        {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(samples);
            p.values[k] = (1.0 - a * a) / (1.0 - 2.0 * a * std::cos(w) + a * a);
        }
        return p;
    }

    /// Lag-one correlation of the centered telegraph process with switch probability alpha.
    inline double telegraph_correlation(double alpha_switch) { return 1.0 - 2.0 * alpha_switch; }

    /// Spectrum of the centered unit-variance telegraph process; its
    /// autocorrelation is (1 - 2 alpha)^|tau|.
    inline SpectralProfile telegraph_spectrum(double alpha_switch, Index samples)
    {
        if (!(alpha_switch > 0.0 && alpha_switch < 1.0))
            throw ValidationError("telegraph switch probability must lie in (0, 1) (got " +
                                  std::to_string(alpha_switch) + ")");
        return ar1_spectrum(telegraph_correlation(alpha_switch), samples);
    }

    /// Independent per-trial random stream derived from (master seed, trial index).
    inline std::mt19937_64 trial_stream(std::uint64_t master_seed, std::uint64_t trial)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                          static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                          0x5eb1u};
        return std::mt19937_64(seq);
    }

    /// Zero-mean unit-variance stationary Gaussian AR(1) path, started from
    /// the stationary distribution.
    template <class Rng>
    Vector generate_ar1(double a, Index samples, Rng &rng)
    {
        if (!(std::abs(a) < 1.0))
            throw ValidationError("AR(1) parameter must satisfy |a| < 1 (got " + std::to_string(a) + ")");
        std::normal_distribution<double> normal(0.0, 1.0);
        const double innovation = std::sqrt(1.0 - a * a);
        Vector s(samples);
        if (samples == 0)
            return s;
        s[0] = normal(rng);
        for (Index t = 1; t < samples; ++t)
            s[t] = a * s[t - 1] + innovation * normal(rng);
        return s;
    }

    inline constexpr Index kTelegraphBurnIn = 1000;

    /// Two-state Markov path over {0, 2}: the state flips with probability alpha.
    template <class Rng>
    Vector generate_telegraph(double alpha_switch, Index samples, Rng &rng)
    {
        if (!(alpha_switch > 0.0 && alpha_switch < 1.0))
            throw ValidationError("telegraph switch probability must lie in (0, 1) (got " +
                                  std::to_string(alpha_switch) + ")");
        std::bernoulli_distribution flip(alpha_switch);
        std::bernoulli_distribution start(0.5);
        bool high = start(rng);
        for (Index t = 0; t < kTelegraphBurnIn; ++t)
            high ^= flip(rng);
        Vector s(samples);
        for (Index t = 0; t < samples; ++t)
        {
            high ^= flip(rng);
            s[t] = high ? 2.0 : 0.0;
        }
        return s;
    }

    /// X = A S + V, row l of V white Gaussian with variance lambda[l].
    template <class Rng>
    TimeSeriesBlock mix_and_observe(const Matrix &mixing, const TimeSeriesBlock &sources, const Vector &noise, Rng &rng)
    {
        if (mixing.cols() != sources.rows())
            throw DimensionError("mixing matrix has " + std::to_string(mixing.cols()) + " columns but " +
                                 std::to_string(sources.rows()) + " source rows were given");
        if (noise.size() != mixing.rows())
            throw DimensionError("expected " + std::to_string(mixing.rows()) + " noise variances, found " +
                                 std::to_string(noise.size()));
        if ((noise.array() < 0.0).any())
            throw ValidationError("noise variances must be nonnegative");

        TimeSeriesBlock x = mixing * sources;
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index l = 0; l < x.rows(); ++l)
        {
            if (noise[l] == 0.0)
                continue;
            const double sd = std::sqrt(noise[l]);
            for (Index t = 0; t < x.cols(); ++t)
                x(l, t) += sd * normal(rng);
        }
        return x;
    }

} // namespace semiblind
