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

// Fisher information, Cramer-Rao bound and the Fisher-scoring solver for
// the likelihood equations.

#include "semiblind/likelihood.hpp"

#include <limits>
#include <optional>

namespace semiblind
{
    /// I[a,b] = sum_k alpha_k Tr(C_k^{-1} dC_k/da C_k^{-1} dC_k/db), ordered as the score.
    ///
    /// With B = C_k^{-1}, Q = B A and G = A^T B A the entries reduce to
    ///   I[A_ij, A_pq]   += 2 alpha P_j P_q (Q_iq Q_pj + B_ip G_jq)
    ///   I[A_ij, lam_l]  += 2 alpha P_j B_il Q_lj
    ///   I[lam_l, lam_n] += alpha B_ln^2
    inline Matrix fim(const ModelParams &params, const SourceSpectra &spectra)
    {
        detail::check_shapes(params, spectra);
        detail::check_finite(params);
        const Index L = params.sensors();
        const Index M = params.sources();
        const Index NA = L * M;
        const Vector alpha = bin_weights(spectra.samples());
        Matrix info = Matrix::Zero(NA + L, NA + L);
        for (Index k = 0; k < spectra.bins(); ++k)
        {
            const auto p = spectra.bin(k);
            const Matrix b = detail::bin_inverse(params.mixing, p, params.noise, nullptr, k);
            const Matrix q = b * params.mixing;
            const Matrix g = params.mixing.transpose() * q;
            const double a = alpha[k];
            for (Index j = 0; j < M; ++j)
                for (Index i = 0; i < L; ++i)
                {
                    const Index row = i + j * L;
                    for (Index qq = 0; qq < M; ++qq)
                    {
                        const double w = 2.0 * a * p[j] * p[qq];
                        if (w == 0.0)
                            continue;
                        for (Index pp = 0; pp < L; ++pp)
                            info(row, pp + qq * L) += w * (q(i, qq) * q(pp, j) + b(i, pp) * g(j, qq));
                    }
                    for (Index l = 0; l < L; ++l)
                        info(row, NA + l) += 2.0 * a * p[j] * b(i, l) * q(l, j);
                }
            info.bottomRightCorner(L, L) += a * b.cwiseAbs2();
        }
        info.bottomLeftCorner(L, NA) = info.topRightCorner(NA, L).transpose();
        return info;
    }

    struct CrlbResult
    {
        Matrix bound;          // K x K inverse information
        double condition = 0;  // eigenvalue ratio of the information matrix
        bool pseudo_inverse = false;

        Vector diagonal() const { return bound.diagonal(); }
    };

    inline constexpr double kIdentifiabilityCondition = 1e12;

    /// Inverse of the information matrix. Ill-conditioned (condition > 1e12)
    /// information falls back to an eigen pseudo-inverse and is flagged.
    inline CrlbResult crlb(const ModelParams &params, const SourceSpectra &spectra)
    {
        const Matrix info = fim(params, spectra);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
        const Vector ev = eig.eigenvalues();
        const double top = ev.maxCoeff();
        const double bottom = ev.minCoeff();
        CrlbResult out;
        out.condition = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
        if (out.condition <= kIdentifiabilityCondition)
        {
            out.bound = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
            return out;
        }
        out.pseudo_inverse = true;
        Vector inv = Vector::Zero(ev.size());
        for (Index i = 0; i < ev.size(); ++i)
            if (ev[i] > top / kIdentifiabilityCondition)
                inv[i] = 1.0 / ev[i];
        out.bound = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
        return out;
    }

    struct ScoringConfig
    {
        int max_iters = 200;
        double grad_tol = 1e-8;      // max-norm of the score
        double step_tol = 1e-10;     // relative parameter change
        double decrement_tol = 1e-12; // g^T I^{-1} g, invariant to the data scale
        double damping = 1.0;        // initial line-search step
        int max_halvings = 30;
        double lambda_floor = 1e-300;
        // Off by default: the iterates only need every C_k positive definite,
        // and at high SNR the unconstrained MLE of a noise variance can be
        // negative. When set, lambda is clamped to lambda_floor after each step.
        bool clamp_noise = false;
        // Estimate one noise variance shared by all sensors (lambda = sigma^2 1).
        bool common_noise = false;

        /// Defaults for T samples of mixtures with average per-sensor power `power`.
        static ScoringConfig defaults(Index samples, double power)
        {
            ScoringConfig cfg;
            cfg.grad_tol = 1e-8 * static_cast<double>(samples / 2);
            cfg.lambda_floor = std::max(1e-10 * power, std::numeric_limits<double>::min());
            return cfg;
        }

        void validate() const
        {
            if (max_iters < 1 || max_halvings < 0)
                throw ValidationError("scoring iteration limits must be positive");
            if (!(grad_tol > 0.0 && step_tol > 0.0 && step_tol < 1.0 && decrement_tol > 0.0))
                throw ValidationError("scoring tolerances must be positive and step_tol < 1");
            if (!(damping > 0.0 && damping <= 1.0))
                throw ValidationError("damping must lie in (0, 1]");
            if (!(lambda_floor > 0.0))
                throw ValidationError("lambda_floor must be positive");
        }
    };

    enum class StopReason
    {
        gradient,
        step,
        max_iters,
        non_pd
    };

    inline const char *to_string(StopReason r)
    {
        switch (r)
        {
        case StopReason::gradient: return "gradient";
        case StopReason::step: return "step";
        case StopReason::max_iters: return "max_iters";
        case StopReason::non_pd: return "non_pd";
        }
        return "unknown";
    }

    struct ScoringTrace
    {
        struct Iterate
        {
            Vector theta;
            double log_likelihood = 0;
            double score_norm = 0;
            double step = 0; // accepted line-search factor, 0 for the initial point
        };

        std::vector<Iterate> iterates;
        bool converged = false;
        StopReason reason = StopReason::max_iters;
        bool regularized = false; // a ridge was added to the information matrix at some iteration
    };

    struct ScoringResult
    {
        ModelParams params;
        ScoringTrace trace;
    };

    /// A0 = [I_M; 0], every lambda0 = smallest eigenvalue of X X^T / T (floored).
    inline ModelParams initialize(const TimeSeriesBlock &x, const Dimensions &dims, double lambda_floor = 0.0)
    {
        dims.validate();
        if (x.rows() != dims.sensors || x.cols() != dims.samples)
            throw DimensionError("data block is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                 ", expected " + std::to_string(dims.sensors) + "x" + std::to_string(dims.samples));
        const Matrix cov = x * x.transpose() / static_cast<double>(x.cols());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
        const double floor =
            lambda_floor > 0.0 ? lambda_floor
                               : std::max(1e-10 * cov.trace() / static_cast<double>(dims.sensors),
                                          std::numeric_limits<double>::min());
        ModelParams p;
        p.mixing = Matrix::Zero(dims.sensors, dims.sources);
        p.mixing.topRows(dims.sources).setIdentity();
        p.noise = Vector::Constant(dims.sensors, std::max(eig.eigenvalues().minCoeff(), floor));
        return p;
    }

    /// Fisher scoring theta <- theta + step I^{-1}(theta) grad L(theta). The
    /// step starts at cfg.damping and is halved until every C_k is positive
    /// definite and the log-likelihood does not decrease. For non-Gaussian
    /// data the same iteration is a quasi-Newton ascent on the Gaussian
    /// quasi-likelihood.
    inline ScoringResult fisher_scoring(const SampleMoments &moments, const SourceSpectra &spectra,
                                        const ModelParams &init, const ScoringConfig &cfg)
    {
        cfg.validate();
        detail::check_moments(init, moments, spectra);
        const Index L = init.sensors();
        const Index M = init.sources();
        const Index K = init.param_count();

        auto clamp = [&](Vector theta)
        {
            if (cfg.clamp_noise)
                for (Index l = 0; l < L; ++l)
                    theta[L * M + l] = std::max(theta[L * M + l], cfg.lambda_floor);
            return theta;
        };
        auto evaluate = [&](const Vector &theta)
        {
            try
            {
                return log_likelihood(ModelParams::from_vector(theta, L, M), moments, spectra);
            }
            catch (const NumericalError &)
            {
                return -std::numeric_limits<double>::infinity();
            }
        };

        // Jacobian of theta with respect to [vec(A); sigma^2] when the noise is tied.
        Matrix tie;
        if (cfg.common_noise)
        {
            tie = Matrix::Zero(K, L * M + 1);
            tie.topLeftCorner(L * M, L * M).setIdentity();
            tie.bottomRightCorner(L, 1).setOnes();
        }
        auto gradient_norm = [&](const Vector &grad)
        { return cfg.common_noise ? std::max(grad.head(L * M).cwiseAbs().maxCoeff(), std::abs(grad.tail(L).sum()))
                                  : grad.cwiseAbs().maxCoeff(); };

        ScoringResult out;
        Vector init_theta = init.to_vector();
        if (cfg.common_noise)
            init_theta.tail(L).setConstant(init.noise.mean());
        Vector theta = clamp(init_theta);
        double ll = log_likelihood(ModelParams::from_vector(theta, L, M), moments, spectra);
        Vector g = score(ModelParams::from_vector(theta, L, M), moments, spectra);
        out.trace.iterates.push_back({theta, ll, g.cwiseAbs().maxCoeff(), 0.0});

        for (int iter = 0;; ++iter)
        {
            if (gradient_norm(g) <= cfg.grad_tol)
            {
                out.trace.converged = true;
                out.trace.reason = StopReason::gradient;
                break;
            }
            if (iter == cfg.max_iters)
            {
                out.trace.reason = StopReason::max_iters;
                break;
            }

            Matrix info = fim(ModelParams::from_vector(theta, L, M), spectra);
            Vector g_free = g;
            if (cfg.common_noise)
            {
                info = tie.transpose() * info * tie;
                g_free = tie.transpose() * g;
            }
            Eigen::LLT<Matrix> llt(info);
            if (llt.info() != Eigen::Success)
            {
                info.diagonal().array() += 1e-12 * info.trace() / static_cast<double>(info.rows());
                llt.compute(info);
                out.trace.regularized = true;
                if (llt.info() != Eigen::Success)
                {
                    out.trace.reason = StopReason::non_pd;
                    break;
                }
            }
            const Vector delta_free = llt.solve(g_free);
            const double decrement = g_free.dot(delta_free);
            const Vector delta = cfg.common_noise ? Vector(tie * delta_free) : delta_free;
            if (decrement <= cfg.decrement_tol)
            {
                out.trace.converged = true;
                out.trace.reason = StopReason::gradient;
                break;
            }

            double step = cfg.damping;
            bool accepted = false;
            Vector candidate;
            double ll_candidate = 0.0;
            for (int h = 0; h <= cfg.max_halvings; ++h, step *= 0.5)
            {
                candidate = clamp(theta + step * delta);
                ll_candidate = evaluate(candidate);
                if (ll_candidate >= ll)
                {
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
            {
                // No ascent left at machine precision.
                out.trace.converged = decrement <= 1e-6;
                out.trace.reason = StopReason::step;
                break;
            }

            const double scale = std::max(theta.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
            const double relative = (candidate - theta).cwiseAbs().maxCoeff() / scale;
            theta = candidate;
            ll = ll_candidate;
            g = score(ModelParams::from_vector(theta, L, M), moments, spectra);
            out.trace.iterates.push_back({theta, ll, g.cwiseAbs().maxCoeff(), step});
            if (relative <= cfg.step_tol)
            {
                out.trace.converged = true;
                out.trace.reason = StopReason::step;
                break;
            }
        }
        out.params = ModelParams::from_vector(theta, L, M);
        return out;
    }

    inline ScoringResult fisher_scoring(const FrequencyObservations &obs, const SourceSpectra &spectra,
                                        const ModelParams &init, const ScoringConfig &cfg)
    {
        return fisher_scoring(sample_moments(obs), spectra, init, cfg);
    }

    struct EstimationOptions
    {
        // Rescale the data to unit average sensor power before solving, so the
        // fixed initial mixing matrix is commensurate with the data.
        bool normalize = false;
        // Ignore the DC bin (use after the row means have been removed).
        bool drop_dc = false;
        // Applied to the (normalized, if requested) data.
        std::optional<ScoringConfig> config;
    };

    /// initialize() followed by fisher_scoring() on the mixtures X.
    inline ScoringResult estimate_parameters(const TimeSeriesBlock &x, const SourceSpectra &spectra,
                                             const EstimationOptions &opts = {})
    {
        const Dimensions dims{spectra.sources(), x.rows(), x.cols()};
        dims.validate();
        if (spectra.samples() != x.cols())
            throw DimensionError("data has T=" + std::to_string(x.cols()) + " samples but the spectra have " +
                                 std::to_string(spectra.samples()) + " bins");
        const double power = x.squaredNorm() / static_cast<double>(x.size());
        const double scale = opts.normalize && power > 0.0 ? std::sqrt(power) : 1.0;
        const TimeSeriesBlock scaled = x / scale;

        SampleMoments moments = sample_moments(dft_forward(scaled));
        if (opts.drop_dc)
            moments.alpha[0] = 0.0;
        ScoringConfig cfg = opts.config.value_or(ScoringConfig::defaults(dims.samples, power / (scale * scale)));
        const ModelParams init = initialize(scaled, dims, cfg.lambda_floor);

        ScoringResult r = fisher_scoring(moments, spectra, init, cfg);
        r.params.mixing *= scale;
        r.params.noise *= scale * scale;
        if (scale != 1.0)
            for (auto &it : r.trace.iterates)
            {
                it.theta.head(dims.sensors * dims.sources) *= scale;
                it.theta.tail(dims.sensors) *= scale * scale;
            }
        return r;
    }

    namespace detail
    {
        inline Index significant_row(const Matrix &a, Index col)
        {
            constexpr double tie = 1e-9;
            if (std::abs(a(0, col)) > tie)
                return 0;
            for (Index r = 1; r < a.rows(); ++r)
                if (std::abs(a(r, col)) > tie)
                    return r;
            return -1;
        }
    } // namespace detail

    /// Flip each column of A_hat whose sign disagrees with A_true on the first
    /// row (or, on a tie, the first row where A_hat is significantly nonzero).
    inline Matrix resolve_sign(const Matrix &estimate, const Matrix &truth)
    {
        if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
            throw DimensionError("sign resolution needs matching matrix shapes");
        Matrix out = estimate;
        for (Index m = 0; m < estimate.cols(); ++m)
        {
            const Index r = detail::significant_row(estimate, m);
            if (r >= 0 && estimate(r, m) * truth(r, m) < 0.0)
                out.col(m) *= -1.0;
        }
        return out;
    }

    /// Orient each column of a channel known to be nonnegative so that its
    /// entries sum to a nonnegative value; a zero sum falls back to the first
    /// significant entry. At low SNR single entries of the estimate are often
    /// of the wrong sign, the column sum much less so.
    inline Matrix resolve_sign_nonnegative(const Matrix &estimate)
    {
        Matrix out = estimate;
        for (Index m = 0; m < estimate.cols(); ++m)
        {
            const double total = estimate.col(m).sum();
            const Index r = detail::significant_row(estimate, m);
            const bool flip = total != 0.0 ? total < 0.0 : (r >= 0 && estimate(r, m) < 0.0);
            if (flip)
                out.col(m) *= -1.0;
        }
        return out;
    }

} // namespace semiblind
