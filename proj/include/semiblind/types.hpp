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

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace semiblind
{
    using Index = Eigen::Index;
    using Matrix = Eigen::MatrixXd;
    using Vector = Eigen::VectorXd;
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;

    // Rows are channels (sources, sensors or noise), columns are time samples.
    using TimeSeriesBlock = Matrix;

    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class DimensionError : public Error
    {
    public:
        using Error::Error;
    };

    class ValidationError : public Error
    {
    public:
        using Error::Error;
    };

    // Raised when a covariance or information matrix fails to factorize.
    // bin() is -1 when the failure is not tied to a frequency bin.
    class NumericalError : public Error
    {
    public:
        explicit NumericalError(const std::string &what, Index bin = -1)
            : Error(what), bin_(bin) {}
        Index bin() const noexcept { return bin_; }

    private:
        Index bin_;
    };

    struct Dimensions
    {
        Index sources = 0; // M
        Index sensors = 0; // L
        Index samples = 0; // T

        Index bins() const noexcept { return samples / 2 + 1; }

        // Parameter count K = ML + L, ordered as [vec(A); lambda].
        Index param_count() const noexcept { return sources * sensors + sensors; }

        void validate() const
        {
            if (sources < 1)
                throw DimensionError("M must be >= 1 (got " + std::to_string(sources) + ")");
            if (sensors < sources)
                throw DimensionError("L must be >= M (got L=" + std::to_string(sensors) +
                                     ", M=" + std::to_string(sources) + ")");
            if (samples < 4 || samples % 2 != 0)
                throw DimensionError("T must be an even integer >= 4 (got " + std::to_string(samples) + ")");
        }
    };

    // theta = [vec(A); lambda], vec() stacking columns.
    struct ModelParams
    {
        Matrix mixing; // L x M
        Vector noise;  // L noise variances

        Index sensors() const noexcept { return mixing.rows(); }
        Index sources() const noexcept { return mixing.cols(); }
        Index param_count() const noexcept { return mixing.size() + noise.size(); }

        Vector to_vector() const
        {
            Vector theta(param_count());
            theta.head(mixing.size()) = mixing.reshaped();
            theta.tail(noise.size()) = noise;
            return theta;
        }

        static ModelParams from_vector(const Vector &theta, Index sensors, Index sources)
        {
            if (theta.size() != sensors * sources + sensors)
                throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                                     ", expected " + std::to_string(sensors * sources + sensors));
            ModelParams p;
            p.mixing = theta.head(sensors * sources).reshaped(sensors, sources);
            p.noise = theta.tail(sensors);
            return p;
        }

        void validate(bool allow_zero_noise = false) const
        {
            if (noise.size() != mixing.rows())
                throw DimensionError("noise vector has length " + std::to_string(noise.size()) +
                                     ", expected L=" + std::to_string(mixing.rows()));
            for (Index l = 0; l < noise.size(); ++l)
            {
                const bool ok = allow_zero_noise ? noise[l] >= 0.0 : noise[l] > 0.0;
                if (!ok || !std::isfinite(noise[l]))
                    throw ValidationError("noise variance " + std::to_string(l + 1) + " must be " +
                                          (allow_zero_noise ? "nonnegative" : "positive"));
            }
            if (!mixing.allFinite())
                throw ValidationError("mixing matrix has non-finite entries");
        }
    };

    inline double to_db(double power) { return 10.0 * std::log10(power); }
    inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

} // namespace semiblind
