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

// Monte-Carlo harnesses for the three benchmark scenarios:
//   exp1a  AR(1) sources, L=4, M=3, high SNR: parameter MSE vs CRLB, source MSE vs MMSE bound
//   exp1b  same sources, unequal sensor noise, source MSE vs sample size
//   exp2   two AR(1) sources, L=5, 0 dB SNR, T=250
//   exp3   telegraph OOK sources over a 4x2 optical channel: BER vs SNR
//
// Every trial draws from its own stream trial_stream(master_seed, trial), so
// reports are bit-reproducible for any thread count.

#include "semiblind/fisher.hpp"
#include "semiblind/mmse.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace semiblind
{
    enum class SourceKind
    {
        ar1,
        telegraph,
        explicit_spectrum
    };

    struct SourceSpec
    {
        SourceKind kind = SourceKind::ar1;
        double parameter = 0.0; // AR coefficient, or switch probability for telegraph sources
        Vector values;          // per-bin spectrum for explicit_spectrum

        static SourceSpec ar1(double a) { return {SourceKind::ar1, a, {}}; }
        static SourceSpec telegraph(double alpha) { return {SourceKind::telegraph, alpha, {}}; }

        /// Spectrum of the (centered, unit-variance) source over T bins.
        SpectralProfile spectrum(Index samples) const
        {
            switch (kind)
            {
            case SourceKind::ar1: return ar1_spectrum(parameter, samples);
            case SourceKind::telegraph: return telegraph_spectrum(parameter, samples);
            case SourceKind::explicit_spectrum:
                if (values.size() != samples)
                    throw DimensionError("explicit spectrum has " + std::to_string(values.size()) +
                                         " bins, expected T=" + std::to_string(samples));
                return {values};
            }
            throw ValidationError("unknown source kind");
        }

        /// One sample path. Telegraph paths are returned over {0, 2}.
        template <class Rng>
        Vector generate(Index samples, Rng &rng) const
        {
            switch (kind)
            {
            case SourceKind::ar1: return generate_ar1(parameter, samples, rng);
            case SourceKind::telegraph: return generate_telegraph(parameter, samples, rng);
            case SourceKind::explicit_spectrum: break;
            }
            throw ValidationError("sources given only by an explicit spectrum cannot be simulated");
        }
    };

    inline SourceSpectra make_spectra(const std::vector<SourceSpec> &sources, Index samples)
    {
        std::vector<SpectralProfile> profiles;
        profiles.reserve(sources.size());
        for (const auto &s : sources)
            profiles.push_back(s.spectrum(samples));
        return SourceSpectra(profiles);
    }

    struct ExperimentConfig
    {
        Dimensions dims;
        Matrix mixing;
        Vector noise;                  // per-sensor variances (exp1a, exp1b, exp2)
        std::vector<SourceSpec> sources;
        Index trials = 100;
        std::uint64_t master_seed = 1;
        std::vector<Index> sample_grid; // exp1b
        std::vector<double> snr_db;     // exp3
        unsigned threads = 0;           // 0: hardware concurrency

        void validate() const
        {
            dims.validate();
            if (trials < 1)
                throw ValidationError("trials must be >= 1");
            if (mixing.rows() != dims.sensors || mixing.cols() != dims.sources)
                throw DimensionError("mixing matrix is " + std::to_string(mixing.rows()) + "x" +
                                     std::to_string(mixing.cols()) + ", expected " + std::to_string(dims.sensors) +
                                     "x" + std::to_string(dims.sources));
            if (static_cast<Index>(sources.size()) != dims.sources)
                throw DimensionError("expected " + std::to_string(dims.sources) + " source specs, found " +
                                     std::to_string(sources.size()));
            if (noise.size() != 0 && noise.size() != dims.sensors)
                throw DimensionError("expected " + std::to_string(dims.sensors) + " noise variances, found " +
                                     std::to_string(noise.size()));
        }
    };

    // ---------------------------------------------------------------- presets

    inline Matrix experiment1_mixing()
    {
        Matrix a(4, 3);
        a << 0.9202, -0.3396, 0.8531,
             0.6021, -0.7977, 0.2639,
             -0.0648, -0.3944, -0.0117,
             0.3877, -0.5301, -0.5394;
        return a;
    }

    inline Matrix experiment2_mixing()
    {
        Matrix a(5, 2);
        a << -0.7270, -2.1943,
             -0.0249, 0.8741,
             -1.2327, 0.8559,
             0.5638, 0.0343,
             1.0297, -0.7223;
        return a;
    }

    inline Matrix experiment3_mixing()
    {
        Matrix a(4, 2);
        a << 1.820, 1.720,
             1.720, 1.820,
             1.628, 1.720,
             1.720, 1.628;
        return a * 1e-6;
    }

    inline ExperimentConfig preset_experiment1_part1()
    {
        ExperimentConfig c;
        c.dims = {3, 4, 1000};
        c.mixing = experiment1_mixing();
        c.noise = Vector::Constant(4, 1e-3);
        c.sources = {SourceSpec::ar1(0.84), SourceSpec::ar1(0.21), SourceSpec::ar1(-0.57)};
        c.trials = 1000;
        return c;
    }

    inline ExperimentConfig preset_experiment1_part2()
    {
        ExperimentConfig c = preset_experiment1_part1();
        for (Index l = 0; l < 4; ++l)
            c.noise[l] = from_db(-5.0 * static_cast<double>(3 + l + 1));
        c.trials = 100;
        c.sample_grid = {250, 500, 1000, 2000};
        return c;
    }

    inline ExperimentConfig preset_experiment2()
    {
        ExperimentConfig c;
        c.dims = {2, 5, 250};
        c.mixing = experiment2_mixing();
        c.noise = Vector::Constant(5, 1.0);
        c.sources = {SourceSpec::ar1(0.21), SourceSpec::ar1(-0.57)};
        c.trials = 1000;
        return c;
    }

    inline ExperimentConfig preset_experiment3()
    {
        ExperimentConfig c;
        c.dims = {2, 4, 256};
        c.mixing = experiment3_mixing();
        c.sources = {SourceSpec::telegraph(0.25), SourceSpec::telegraph(0.75)};
        c.trials = 2000;
        c.snr_db = {-20, -15, -10, -5, 0, 5, 10, 15, 20, 25, 30, 35, 40};
        return c;
    }

    // ------------------------------------------------------------- execution

    /// fn(i) for i in [0, count), spread over `threads` workers; results in index order.
    template <class Fn>
    auto run_trials(Index count, unsigned threads, Fn &&fn) -> std::vector<decltype(fn(Index{}))>
    {
        using Result = decltype(fn(Index{}));
        std::vector<Result> results(static_cast<std::size_t>(count));
        if (threads == 0)
            threads = std::max(1u, std::thread::hardware_concurrency());
        threads = static_cast<unsigned>(std::min<Index>(threads, std::max<Index>(count, 1)));

        std::atomic<Index> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&]
        {
            for (Index i = next++; i < count; i = next++)
            {
                try
                {
                    results[static_cast<std::size_t>(i)] = fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next = count;
                }
            }
        };
        if (threads <= 1)
            worker();
        else
        {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t)
                pool.emplace_back(worker);
            for (auto &t : pool)
                t.join();
        }
        if (failure)
            std::rethrow_exception(failure);
        return results;
    }

    struct TrialOutcome
    {
        ModelParams theta_hat;
        Vector theta_sq_err;  // per parameter, [vec(A); lambda] order
        Vector source_sq_err; // per source, time-averaged, estimate built from theta_hat
        Vector oracle_sq_err; // per source, estimate built from the true parameters
        Vector bit_errors;    // per source, threshold decisions (exp3 only)
        bool converged = false;
        StopReason reason = StopReason::max_iters;
        Index iterations = 0;
    };

    struct Aggregate
    {
        Vector mean;
        Vector stderr_;
        Index count = 0;
        Index excluded = 0;

        Vector mean_db() const { return mean.unaryExpr([](double v) { return to_db(v); }); }
    };

    /// Sample mean and standard error of each component.
    inline Aggregate aggregate(const std::vector<Vector> &samples, Index excluded = 0)
    {
        if (samples.empty())
            throw ValidationError("cannot aggregate an empty set of trials");
        const Index n = static_cast<Index>(samples.size());
        Aggregate out;
        out.count = n;
        out.excluded = excluded;
        out.mean = Vector::Zero(samples.front().size());
        for (const auto &s : samples)
            out.mean += s;
        out.mean /= static_cast<double>(n);
        out.stderr_ = Vector::Zero(out.mean.size());
        if (n > 1)
        {
            for (const auto &s : samples)
                out.stderr_ += (s - out.mean).cwiseAbs2();
            out.stderr_ = (out.stderr_ / static_cast<double>(n - 1) / static_cast<double>(n)).cwiseSqrt();
        }
        return out;
    }

    /// Aggregate one field over the converged trials; the rest are counted as excluded.
    inline Aggregate aggregate(const std::vector<TrialOutcome> &trials, Vector TrialOutcome::*field)
    {
        std::vector<Vector> samples;
        Index excluded = 0;
        for (const auto &t : trials)
        {
            if (t.converged)
                samples.push_back(t.*field);
            else
                ++excluded;
        }
        if (samples.empty())
            throw NumericalError("no trial converged (" + std::to_string(excluded) + " excluded)");
        return aggregate(samples, excluded);
    }

    // --------------------------------------------------------------- reports

    struct ParameterRow
    {
        std::string name;
        double crlb = 0;
        double mse = 0;
        double stderr_ = 0;
    };

    struct SourceRow
    {
        Index source = 0;
        Index samples = 0;
        double bound = 0;      // oracle MMSE bound
        double mse = 0;        // empirical, estimated parameters
        double stderr_ = 0;
        double oracle_mse = 0; // empirical, true parameters
    };

    struct EstimationReport
    {
        std::vector<ParameterRow> parameters;
        std::vector<SourceRow> sources;
        Index trials = 0;
        Index excluded = 0;
        double crlb_condition = 0;
    };

    struct SampleSizeReport
    {
        std::vector<SourceRow> rows; // one per (T, source)
        std::vector<Index> excluded; // per T
        Index trials = 0;
    };

    struct BerRow
    {
        double snr_db = 0;
        Index source = 0;
        std::string receiver; // "qml" or "oracle"
        double ber = 0;
        double stderr_ = 0;   // over per-trial BERs
        Index errors = 0;
        Index bits = 0;
    };

    struct BerReport
    {
        std::vector<BerRow> rows;
        std::vector<Index> excluded; // per SNR point
        Index trials = 0;
        Index samples = 0;
    };

    inline std::vector<std::string> parameter_names(Index sensors, Index sources)
    {
        std::vector<std::string> names;
        for (Index j = 0; j < sources; ++j)
            for (Index i = 0; i < sensors; ++i)
                names.push_back("A" + std::to_string(i + 1) + std::to_string(j + 1));
        for (Index l = 0; l < sensors; ++l)
            names.push_back("lambda" + std::to_string(l + 1));
        return names;
    }

    namespace detail
    {
        template <class Rng>
        TimeSeriesBlock draw_sources(const std::vector<SourceSpec> &specs, Index samples, Rng &rng)
        {
            TimeSeriesBlock s(static_cast<Index>(specs.size()), samples);
            for (std::size_t m = 0; m < specs.size(); ++m)
                s.row(static_cast<Index>(m)) = specs[m].generate(samples, rng).transpose();
            return s;
        }

        inline Vector time_averaged_sq_err(const TimeSeriesBlock &estimate, const TimeSeriesBlock &truth)
        {
            return (estimate - truth).cwiseAbs2().rowwise().mean();
        }

        // One Gaussian trial: estimate theta, then the sources with theta_hat and with the truth.
        inline TrialOutcome gaussian_trial(const ExperimentConfig &cfg, const SourceSpectra &spectra, Index samples,
                                           std::uint64_t seed, Index trial)
        {
            auto rng = trial_stream(seed, static_cast<std::uint64_t>(trial));
            const TimeSeriesBlock s = draw_sources(cfg.sources, samples, rng);
            const TimeSeriesBlock x = mix_and_observe(cfg.mixing, s, cfg.noise, rng);
            const FrequencyObservations obs = dft_forward(x);

            TrialOutcome out;
            const ScoringResult fit = estimate_parameters(x, spectra);
            out.converged = fit.trace.converged;
            out.reason = fit.trace.reason;
            out.iterations = static_cast<Index>(fit.trace.iterates.size()) - 1;
            out.theta_hat = {resolve_sign(fit.params.mixing, cfg.mixing), fit.params.noise};
            const ModelParams truth{cfg.mixing, cfg.noise};
            out.theta_sq_err = (out.theta_hat.to_vector() - truth.to_vector()).cwiseAbs2();
            if (!out.converged)
                return out;
            try
            {
                out.source_sq_err = time_averaged_sq_err(estimate_sources(out.theta_hat, obs, spectra).sources, s);
            }
            catch (const NumericalError &)
            {
                out.converged = false;
                return out;
            }
            out.oracle_sq_err = time_averaged_sq_err(estimate_sources(truth, obs, spectra).sources, s);
            return out;
        }

        inline EstimationReport estimation_experiment(const ExperimentConfig &cfg)
        {
            cfg.validate();
            if (cfg.noise.size() != cfg.dims.sensors)
                throw ValidationError("experiment needs one noise variance per sensor");
            const Index T = cfg.dims.samples;
            const SourceSpectra spectra = make_spectra(cfg.sources, T);
            const ModelParams truth{cfg.mixing, cfg.noise};

            const auto trials = run_trials(cfg.trials, cfg.threads, [&](Index i)
                                           { return gaussian_trial(cfg, spectra, T, cfg.master_seed, i); });

            EstimationReport report;
            report.trials = cfg.trials;
            const CrlbResult bound = crlb(truth, spectra);
            report.crlb_condition = bound.condition;
            const Aggregate theta = aggregate(trials, &TrialOutcome::theta_sq_err);
            const Aggregate src = aggregate(trials, &TrialOutcome::source_sq_err);
            const Aggregate oracle = aggregate(trials, &TrialOutcome::oracle_sq_err);
            report.excluded = theta.excluded;
            const auto names = parameter_names(cfg.dims.sensors, cfg.dims.sources);
            for (Index i = 0; i < truth.param_count(); ++i)
                report.parameters.push_back({names[static_cast<std::size_t>(i)], bound.bound(i, i), theta.mean[i],
                                             theta.stderr_[i]});
            const MsePrediction mmse = mmse_bound(truth, spectra);
            for (Index m = 0; m < cfg.dims.sources; ++m)
                report.sources.push_back({m + 1, T, mmse.per_source[m], src.mean[m], src.stderr_[m], oracle.mean[m]});
            return report;
        }
    } // namespace detail

    /// Parameter MSE against the CRLB and source MSE against the MMSE bound
    /// at the part-1 configuration (equal sensor noise).
    inline EstimationReport run_experiment1_part1(const ExperimentConfig &cfg)
    {
        return detail::estimation_experiment(cfg);
    }

    inline EstimationReport run_experiment2(const ExperimentConfig &cfg)
    {
        return detail::estimation_experiment(cfg);
    }

    /// ML-based MMSE source error and the MMSE bound for every T in cfg.sample_grid.
    inline SampleSizeReport run_experiment1_part2(const ExperimentConfig &cfg)
    {
        cfg.validate();
        if (cfg.sample_grid.empty())
            throw ValidationError("experiment 1 part 2 needs a sample-size grid");
        const ModelParams truth{cfg.mixing, cfg.noise};
        SampleSizeReport report;
        report.trials = cfg.trials;
        for (std::size_t g = 0; g < cfg.sample_grid.size(); ++g)
        {
            const Index T = cfg.sample_grid[g];
            Dimensions{cfg.dims.sources, cfg.dims.sensors, T}.validate();
            const SourceSpectra spectra = make_spectra(cfg.sources, T);
            // Distinct seed per grid point so the grid points are independent.
            const std::uint64_t seed = cfg.master_seed + 0x9e3779b97f4a7c15ull * (g + 1);
            const auto trials = run_trials(cfg.trials, cfg.threads, [&](Index i)
                                           { return detail::gaussian_trial(cfg, spectra, T, seed, i); });
            const Aggregate src = aggregate(trials, &TrialOutcome::source_sq_err);
            const Aggregate oracle = aggregate(trials, &TrialOutcome::oracle_sq_err);
            report.excluded.push_back(src.excluded);
            const MsePrediction mmse = mmse_bound(truth, spectra);
            for (Index m = 0; m < cfg.dims.sources; ++m)
                report.rows.push_back({m + 1, T, mmse.per_source[m], src.mean[m], src.stderr_[m], oracle.mean[m]});
        }
        return report;
    }

    /// Noise variance giving the requested SNR: mean over sensors of the
    /// received source power (A A^T)_ll (unit-variance sources) over sigma^2.
    inline double noise_for_snr(const Matrix &mixing, double snr_db)
    {
        const double received = (mixing * mixing.transpose()).diagonal().mean();
        return received / from_db(snr_db);
    }

    namespace detail
    {
        inline Vector bit_errors(const TimeSeriesBlock &estimate, const TimeSeriesBlock &symbols)
        {
            Vector errors = Vector::Zero(symbols.rows());
            for (Index m = 0; m < symbols.rows(); ++m)
                for (Index t = 0; t < symbols.cols(); ++t)
                    errors[m] += ((estimate(m, t) > 0.0) != (symbols(m, t) > 1.0)) ? 1.0 : 0.0;
            return errors;
        }
    } // namespace detail

    /// BER of threshold decisions on the QML-based LMMSE estimate and on the
    /// oracle LMMSE estimate (true channel and noise level), per SNR point.
    /// The same source and noise draws are reused at every SNR point.
    inline BerReport run_experiment3(const ExperimentConfig &cfg)
    {
        cfg.validate();
        if (cfg.snr_db.empty())
            throw ValidationError("experiment 3 needs an SNR grid");
        const Index T = cfg.dims.samples;
        const Index M = cfg.dims.sources;
        const Index L = cfg.dims.sensors;
        const SourceSpectra spectra = make_spectra(cfg.sources, T);

        BerReport report;
        report.trials = cfg.trials;
        report.samples = T;
        for (double snr : cfg.snr_db)
        {
            const double sigma2 = noise_for_snr(cfg.mixing, snr);
            const ModelParams truth{cfg.mixing, Vector::Constant(L, sigma2)};

            const auto trials = run_trials(cfg.trials, cfg.threads, [&](Index i)
            {
                auto rng = trial_stream(cfg.master_seed, static_cast<std::uint64_t>(i));
                const TimeSeriesBlock s = detail::draw_sources(cfg.sources, T, rng);
                TimeSeriesBlock x = mix_and_observe(cfg.mixing, s, truth.noise, rng);
                x.colwise() -= x.rowwise().mean();
                FrequencyObservations obs = dft_forward(x);
                obs.bins.col(0).setZero();

                TrialOutcome out;
                EstimationOptions opts;
                opts.normalize = true;
                opts.drop_dc = true;
                ScoringConfig sc = ScoringConfig::defaults(T, 1.0);
                sc.common_noise = true;
                opts.config = sc;
                const ScoringResult fit = estimate_parameters(x, spectra, opts);
                out.converged = fit.trace.converged;
                out.reason = fit.trace.reason;
                out.iterations = static_cast<Index>(fit.trace.iterates.size()) - 1;
                out.theta_hat = {resolve_sign_nonnegative(fit.params.mixing), fit.params.noise};
                out.bit_errors.resize(2 * M);
                out.bit_errors.head(M) = detail::bit_errors(estimate_sources(truth, obs, spectra).sources, s);
                if (out.converged)
                {
                    try
                    {
                        out.bit_errors.tail(M) =
                            detail::bit_errors(estimate_sources(out.theta_hat, obs, spectra).sources, s);
                    }
                    catch (const NumericalError &)
                    {
                        out.converged = false;
                    }
                }
                return out;
            });

            std::vector<Vector> rates;
            Index excluded = 0;
            for (const auto &t : trials)
            {
                if (!t.converged)
                {
                    ++excluded;
                    continue;
                }
                rates.push_back(t.bit_errors / static_cast<double>(T));
            }
            report.excluded.push_back(excluded);
            if (rates.empty())
                throw NumericalError("no trial converged at SNR " + std::to_string(snr) + " dB");
            const Aggregate agg = aggregate(rates, excluded);
            const Index used = agg.count;
            for (Index m = 0; m < M; ++m)
            {
                const double oracle = agg.mean[m];
                const double qml = agg.mean[M + m];
                report.rows.push_back({snr, m + 1, "qml", qml, agg.stderr_[M + m],
                                       static_cast<Index>(std::llround(qml * static_cast<double>(used * T))),
                                       used * T});
                report.rows.push_back({snr, m + 1, "oracle", oracle, agg.stderr_[m],
                                       static_cast<Index>(std::llround(oracle * static_cast<double>(used * T))),
                                       used * T});
            }
        }
        return report;
    }

} // namespace semiblind
