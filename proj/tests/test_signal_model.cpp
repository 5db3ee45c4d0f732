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

#include "semiblind/experiments.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace semiblind;
using Catch::Approx;

namespace
{
    Matrix random_block(Index rows, Index cols, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        Matrix x(rows, cols);
        for (Index i = 0; i < x.size(); ++i)
            x.data()[i] = normal(rng);
        return x;
    }

    double lag1_correlation(const Vector &s)
    {
        const Vector c = s.array() - s.mean();
        return c.head(c.size() - 1).dot(c.tail(c.size() - 1)) / c.squaredNorm();
    }
} // namespace

TEST_CASE("dimensions reject L < M and odd T", "[signal-model]")
{
    CHECK_NOTHROW(Dimensions{3, 4, 1000}.validate());
    CHECK_THROWS_AS((Dimensions{3, 2, 1000}.validate()), DimensionError);
    CHECK_THROWS_WITH((Dimensions{3, 2, 1000}.validate()), Catch::Matchers::ContainsSubstring("L must be >= M"));
    CHECK_THROWS_AS((Dimensions{1, 1, 7}.validate()), DimensionError);
    CHECK(Dimensions{3, 4, 1000}.bins() == 501);
    CHECK(Dimensions{3, 4, 1000}.param_count() == 16);
}

TEST_CASE("DFT of a constant row is a DC spike", "[signal-model]")
{
    const double c = 1.7;
    const FrequencyObservations f = dft_forward(Matrix::Constant(1, 4, c));
    CHECK(f.bins(0, 0).real() == Approx(2.0 * c));
    CHECK(std::abs(f.bins(0, 1)) < 1e-15);
    CHECK(std::abs(f.bins(0, 2)) < 1e-15);
    CHECK(f.alpha[0] == 0.5);
    CHECK(f.alpha[1] == 1.0);
    CHECK(f.alpha[2] == 0.5);
}

TEST_CASE("DFT of a unit impulse is flat", "[signal-model]")
{
    Matrix x = Matrix::Zero(1, 4);
    x(0, 0) = 1.0;
    const FrequencyObservations f = dft_forward(x);
    for (Index k = 0; k < 3; ++k)
        CHECK(std::abs(f.bins(0, k) - std::complex<double>(0.5, 0.0)) < 1e-15);
}

TEST_CASE("DFT matches direct summation and round-trips", "[signal-model]")
{
    const Matrix x = random_block(3, 16, 11);
    const FrequencyObservations f = dft_forward(x);
    const CMatrix direct = oracle::dft(x);
    CHECK((f.bins - direct.leftCols(9)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dft_inverse(f) - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((oracle::idft(direct) - x).cwiseAbs().maxCoeff() < 1e-12);
    for (Index r = 0; r < 3; ++r)
    {
        CHECK(f.bins(r, 0).imag() == 0.0);
        CHECK(f.bins(r, 8).imag() == 0.0);
    }
}

TEST_CASE("inverse DFT of a DC spike and of zeros", "[signal-model]")
{
    FrequencyObservations f;
    f.samples = 4;
    f.alpha = bin_weights(4);
    f.bins = CMatrix::Zero(1, 3);
    CHECK(dft_inverse(f).cwiseAbs().maxCoeff() == 0.0);
    f.bins(0, 0) = 2.0 * 0.3;
    CHECK((dft_inverse(f).array() - 0.3).abs().maxCoeff() < 1e-15);
}

TEST_CASE("DFT rejects odd T, inverse rejects complex real bins", "[signal-model]")
{
    CHECK_THROWS_AS(dft_forward(Matrix::Ones(2, 7)), DimensionError);
    FrequencyObservations f = dft_forward(Matrix::Ones(1, 8));
    f.bins(0, 4) = {0.0, 1e-3};
    CHECK_THROWS_AS(dft_inverse(f), ValidationError);
}

TEST_CASE("Parseval over the conjugate extension", "[signal-model]")
{
    const Matrix x = random_block(2, 32, 5);
    const FrequencyObservations f = dft_forward(x);
    const double freq = 2.0 * (f.bins.cwiseAbs2() * f.alpha).sum();
    CHECK(std::abs(freq - x.squaredNorm()) < 1e-10);
}

TEST_CASE("AR(1) spectrum closed form and cosine-sum oracle", "[signal-model]")
{
    CHECK((ar1_spectrum(0.0, 16).values.array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(ar1_spectrum(0.5, 16).values[0] == Approx(3.0).epsilon(1e-14));
    const SpectralProfile p = ar1_spectrum(0.84, 1000);
    CHECK(p.values[500] == Approx((1 - 0.84 * 0.84) / (1 + 2 * 0.84 + 0.84 * 0.84)).epsilon(1e-14));
    CHECK(p.values[500] == Approx(0.0870).margin(5e-5));

    const Index T = 4096;
    for (double a : {0.5, 0.84, -0.57})
    {
        const SpectralProfile s = ar1_spectrum(a, T);
        for (Index k : {Index{0}, Index{1}, Index{700}, T / 2})
        {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(T);
            CHECK(s.values[k] == Approx(oracle::cosine_sum_spectrum(a, w)).epsilon(1e-9));
        }
    }
    CHECK(ar1_spectrum(0.84, 1000).variance() == Approx(1.0).margin(1e-2));
    CHECK_THROWS_AS(ar1_spectrum(1.0, 8), ValidationError);
    CHECK_THROWS_AS(ar1_spectrum(-1.2, 8), ValidationError);
}

TEST_CASE("telegraph spectrum equals the AR(1) spectrum with rho = 1 - 2 alpha", "[signal-model]")
{
    CHECK((telegraph_spectrum(0.5, 64).values.array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK((telegraph_spectrum(0.25, 64).values - ar1_spectrum(0.5, 64).values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((telegraph_spectrum(0.75, 64).values - ar1_spectrum(-0.5, 64).values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(telegraph_spectrum(0.0, 8), ValidationError);
    CHECK_THROWS_AS(telegraph_spectrum(1.0, 8), ValidationError);
}

TEST_CASE("telegraph spectrum matches the averaged periodogram", "[signal-model][slow]")
{
    // Mean periodogram over 1e4 simulated centered paths.
    const Index T = 64;
    for (double alpha : {0.25, 0.75})
    {
        Vector acc = Vector::Zero(T / 2 + 1);
        const int runs = 10000;
        for (int r = 0; r < runs; ++r)
        {
            auto rng = trial_stream(99, static_cast<std::uint64_t>(r));
            const Vector s = generate_telegraph(alpha, T, rng).array() - 1.0;
            acc += dft_forward(s.transpose()).bins.row(0).cwiseAbs2().transpose();
        }
        acc /= runs;
        const Vector expected = telegraph_spectrum(alpha, T).values.head(T / 2 + 1);
        // Finite-T bias is O(1/T); sampling error of the mean is ~1%.
        CHECK(((acc - expected).array().abs() / expected.array()).maxCoeff() < 0.08);
        CHECK(((acc - expected).array() / expected.array()).mean() == Approx(0.0).margin(0.02));
    }
}

TEST_CASE("AR(1) generator statistics and determinism", "[signal-model]")
{
    auto rng = trial_stream(1, 0);
    const Vector white = generate_ar1(0.0, 100000, rng);
    CHECK(white.squaredNorm() / 1e5 == Approx(1.0).margin(0.02));
    auto rng2 = trial_stream(1, 1);
    const Vector s = generate_ar1(0.84, 100000, rng2);
    CHECK(lag1_correlation(s) == Approx(0.84).margin(0.01));
    CHECK(s.squaredNorm() / 1e5 == Approx(1.0).margin(0.05));

    auto a = trial_stream(42, 3), b = trial_stream(42, 3);
    CHECK(generate_ar1(0.3, 50, a) == generate_ar1(0.3, 50, b));
    auto c = trial_stream(42, 4);
    auto d = trial_stream(42, 3);
    CHECK(generate_ar1(0.3, 50, c) != generate_ar1(0.3, 50, d));
}

TEST_CASE("telegraph generator statistics", "[signal-model]")
{
    auto rng = trial_stream(2, 0);
    const Vector s = generate_telegraph(0.25, 100000, rng);
    CHECK(((s.array() == 0.0) || (s.array() == 2.0)).all());
    CHECK(lag1_correlation(s) == Approx(0.5).margin(0.02));
    CHECK((s.array() == 2.0).cast<double>().mean() == Approx(0.5).margin(0.01));
    const Vector centered = s.array() - 1.0;
    CHECK(centered.squaredNorm() / 1e5 == Approx(1.0).margin(1e-12));

    auto rng2 = trial_stream(2, 1);
    const Vector fast = generate_telegraph(0.99, 1000, rng2);
    Index flips = 0;
    for (Index t = 1; t < fast.size(); ++t)
        flips += fast[t] != fast[t - 1] ? 1 : 0;
    CHECK(flips > 970);
}

TEST_CASE("mix_and_observe", "[signal-model]")
{
    const Matrix S = random_block(3, 40, 3);
    auto rng = trial_stream(5, 0);
    CHECK(mix_and_observe(Matrix::Identity(3, 3), S, Vector::Zero(3), rng) == S);

    auto rng2 = trial_stream(5, 1);
    const Matrix V = mix_and_observe(Matrix::Zero(2, 1), Matrix::Zero(1, 100000), Vector::Constant(2, 0.25), rng2);
    for (Index l = 0; l < 2; ++l)
        CHECK(V.row(l).squaredNorm() / 1e5 == Approx(0.25).margin(0.005));

    // Unit-variance sources through the first benchmark mixing at sigma^2 = 1e-3: about 30 dB per sensor.
    const Matrix A = experiment1_mixing();
    const double snr = to_db((A * A.transpose()).diagonal().mean() / 1e-3);
    CHECK(snr == Approx(30.0).margin(1.5));

    CHECK_THROWS_AS(mix_and_observe(Matrix::Identity(2, 2), S, Vector::Zero(2), rng), DimensionError);
    CHECK_THROWS_AS(mix_and_observe(Matrix::Identity(3, 3), S, Vector::Constant(3, -1.0), rng), ValidationError);
}

TEST_CASE("source spectra validation", "[signal-model]")
{
    SpectralProfile bad{Vector::Ones(8)};
    bad.values[1] = 2.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    SpectralProfile negative{Vector::Ones(8)};
    negative.values[0] = -1.0;
    CHECK_THROWS_AS(negative.validate(), ValidationError);
    CHECK_THROWS_AS(SourceSpectra({ar1_spectrum(0.1, 8), ar1_spectrum(0.1, 16)}), DimensionError);
    const SourceSpectra sp({ar1_spectrum(0.1, 8), ar1_spectrum(-0.1, 8)});
    CHECK(sp.bins() == 5);
    CHECK(sp.bin(2).size() == 2);
}
