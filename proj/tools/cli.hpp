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

// semiblind simulate | estimate | crlb | experiment <exp1a|exp1b|exp2|exp3>

#include "cli_io.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

#ifndef SEMIBLIND_VERSION
#define SEMIBLIND_VERSION "0.0.0"
#endif

namespace semiblind::cli
{
    inline constexpr int kExitOk = 0;
    inline constexpr int kExitUsage = 1;
    inline constexpr int kExitConfig = 2;
    inline constexpr int kExitData = 3;
    inline constexpr int kExitNumerical = 4;
    inline constexpr int kExitWarning = 5; // finished, but the result is flagged

    struct Options
    {
        std::string config;
        std::string data;
        std::string out = ".";
        std::string experiment;
        std::optional<std::uint64_t> seed;
        std::optional<Index> trials;
        std::optional<unsigned> threads;
    };

    namespace detail
    {

        inline RunConfig resolve(const Options &opt, RunConfig base = {})
        {
            RunConfig rc = opt.config.empty() ? std::move(base) : load_config(opt.config, std::move(base));
            if (opt.seed)
                rc.experiment.master_seed = *opt.seed;
            if (opt.trials)
            {
                if (*opt.trials < 1)
                    throw ConfigError("--trials must be >= 1");
                rc.experiment.trials = *opt.trials;
            }
            if (opt.threads)
                rc.experiment.threads = *opt.threads;
            return rc;
        }

        class Writer
        {
        public:
            Writer(const Options &opt, const RunConfig &rc) : dir_(opt.out)
            {
                std::error_code ec;
                std::filesystem::create_directories(dir_, ec);
                if (ec)
                    throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
                manifest_.config_digest = config_digest(rc);
                manifest_.seed = rc.experiment.master_seed;
                manifest_.tool_version = SEMIBLIND_VERSION;
            }

            void file(const std::string &name, const std::string &text)
            {
                write_text(dir_ / name, text);
                manifest_.outputs.push_back((dir_ / name).string());
            }

            void finish()
            {
                const auto path = dir_ / "manifest.json";
                manifest_.outputs.push_back(path.string());
                write_text(path, manifest_.to_json().dump(2) + "\n");
            }

        private:
            std::filesystem::path dir_;
            RunManifest manifest_;
        };

        inline std::string db(double v) { return format_number(to_db(v)); }

        inline SourceSpectra spectra_for(const ExperimentConfig &c)
        {
            try
            {
                return make_spectra(c.sources, c.dims.samples);
            }
            catch (const Error &e)
            {
                throw ConfigError(std::string("invalid source specification: ") + e.what());
            }
        }

        inline void require_noise(const ExperimentConfig &c)
        {
            if (c.noise.size() != c.dims.sensors)
                throw ConfigError("field 'noise' must give " + std::to_string(c.dims.sensors) +
                                  " variances (found " + std::to_string(c.noise.size()) + ")");
            if ((c.noise.array() < 0.0).any())
                throw ConfigError("field 'noise' must be nonnegative");
        }

        inline int simulate(const Options &opt, std::ostream &out)
        {
            const RunConfig rc = resolve(opt);
            const ExperimentConfig &c = rc.experiment;
            validate_config(c);
            require_noise(c);
            auto rng = trial_stream(c.master_seed, 0);
            TimeSeriesBlock s(c.dims.sources, c.dims.samples);
            for (Index m = 0; m < c.dims.sources; ++m)
            {
                try
                {
                    s.row(m) = c.sources[static_cast<std::size_t>(m)].generate(c.dims.samples, rng).transpose();
                }
                catch (const ValidationError &e)
                {
                    throw ConfigError("sources[" + std::to_string(m) + "]: " + e.what());
                }
            }
            const TimeSeriesBlock x = mix_and_observe(c.mixing, s, c.noise, rng);

            Writer w(opt, rc);
            w.file("mixtures.csv", matrix_csv(x));
            w.file("sources.csv", matrix_csv(s));
            w.file("params.json", json{{"mixing", matrix_json(c.mixing)}, {"noise", vector_json(c.noise)}}.dump(2) + "\n");
            w.finish();
            out << "simulated " << c.dims.sensors << " mixtures x " << c.dims.samples << " samples\n";
            return kExitOk;
        }

        inline int estimate(const Options &opt, std::ostream &out, std::ostream &err)
        {
            if (opt.data.empty())
                throw ConfigError("estimate needs --data <csv>");
            RunConfig rc = resolve(opt);
            ExperimentConfig &c = rc.experiment;
            TimeSeriesBlock x = read_matrix_csv(opt.data);
            if (c.dims.samples == 0)
                c.dims.samples = x.cols();
            if (x.cols() != c.dims.samples)
                throw DataError("data has T=" + std::to_string(x.cols()) + " samples, configuration expects " +
                                std::to_string(c.dims.samples));
            if (x.rows() != c.dims.sensors)
                throw DataError("data has " + std::to_string(x.rows()) + " channels, configuration expects L=" +
                                std::to_string(c.dims.sensors));
            if (c.mixing.size() == 0)
                c.mixing = Matrix::Zero(c.dims.sensors, c.dims.sources);
            validate_config(c);
            const SourceSpectra spectra = spectra_for(c);

            if (rc.estimation.center)
                x.colwise() -= x.rowwise().mean();
            EstimationOptions eo;
            eo.normalize = rc.estimation.normalize;
            eo.drop_dc = rc.estimation.drop_dc;
            if (rc.estimation.common_noise)
            {
                const double power = x.squaredNorm() / static_cast<double>(x.size());
                ScoringConfig sc = ScoringConfig::defaults(c.dims.samples, eo.normalize ? 1.0 : power);
                sc.common_noise = true;
                eo.config = sc;
            }
            const ScoringResult fit = estimate_parameters(x, spectra, eo);
            FrequencyObservations obs = dft_forward(x);
            if (rc.estimation.drop_dc)
                obs.bins.col(0).setZero();
            const SourceEstimate est = estimate_sources(fit.params, obs, spectra);

            const auto &last = fit.trace.iterates.back();
            json theta{{"mixing", matrix_json(fit.params.mixing)},
                       {"noise", vector_json(fit.params.noise)},
                       {"converged", fit.trace.converged},
                       {"reason", to_string(fit.trace.reason)},
                       {"iterations", fit.trace.iterates.size() - 1},
                       {"log_likelihood", last.log_likelihood},
                       {"score_norm", last.score_norm},
                       {"regularized", fit.trace.regularized}};

            CsvTable trace;
            trace.header = {"iteration", "log_likelihood", "score_norm", "step"};
            for (const auto &name : parameter_names(c.dims.sensors, c.dims.sources))
                trace.header.push_back(name);
            for (std::size_t i = 0; i < fit.trace.iterates.size(); ++i)
            {
                const auto &it = fit.trace.iterates[i];
                std::vector<std::string> row{std::to_string(i), format_number(it.log_likelihood),
                                             format_number(it.score_norm), format_number(it.step)};
                for (Index p = 0; p < it.theta.size(); ++p)
                    row.push_back(format_number(it.theta[p]));
                trace.add(std::move(row));
            }

            Writer w(opt, rc);
            w.file("theta.json", theta.dump(2) + "\n");
            w.file("sources.csv", matrix_csv(est.sources));
            w.file("trace.csv", trace.str());
            w.finish();
            out << "estimate: " << to_string(fit.trace.reason) << " after " << fit.trace.iterates.size() - 1
                << " iterations\n";
            if (!fit.trace.converged)
            {
                err << "warning: Fisher scoring did not converge (" << to_string(fit.trace.reason)
                    << "); the last iterate was written\n";
                return kExitWarning;
            }
            return kExitOk;
        }

        inline int crlb_command(const Options &opt, std::ostream &out, std::ostream &err)
        {
            const RunConfig rc = resolve(opt);
            const ExperimentConfig &c = rc.experiment;
            validate_config(c);
            require_noise(c);
            const SourceSpectra spectra = spectra_for(c);
            const CrlbResult bound = crlb({c.mixing, c.noise}, spectra);

            CsvTable table;
            table.header = {"parameter", "crlb", "crlb_db"};
            const auto names = parameter_names(c.dims.sensors, c.dims.sources);
            for (Index i = 0; i < bound.bound.rows(); ++i)
                table.add({names[static_cast<std::size_t>(i)], format_number(bound.bound(i, i)),
                           db(bound.bound(i, i))});

            Writer w(opt, rc);
            w.file("crlb.csv", table.str());
            w.file("crlb.json", json{{"condition", bound.condition}, {"pseudo_inverse", bound.pseudo_inverse}}.dump(2) +
                                    "\n");
            w.finish();
            out << "FIM condition number " << format_number(bound.condition) << "\n";
            if (bound.pseudo_inverse)
            {
                err << "warning: the Fisher information is ill-conditioned (condition " << format_number(bound.condition)
                    << " > " << format_number(kIdentifiabilityCondition)
                    << "); parameters may not be identifiable, pseudo-inverse bounds written\n";
                return kExitWarning;
            }
            return kExitOk;
        }

        inline void write_estimation_report(Writer &w, const EstimationReport &r)
        {
            CsvTable params;
            params.header = {"parameter", "crlb", "crlb_db", "mse", "mse_db", "stderr", "deviation_db"};
            for (const auto &p : r.parameters)
                params.add({p.name, format_number(p.crlb), db(p.crlb), format_number(p.mse), db(p.mse),
                            format_number(p.stderr_), format_number(to_db(p.mse) - to_db(p.crlb))});
            CsvTable sources;
            sources.header = {"source", "samples", "bound", "bound_db", "mse", "mse_db", "stderr", "oracle_mse",
                              "oracle_mse_db"};
            for (const auto &s : r.sources)
                sources.add({std::to_string(s.source), std::to_string(s.samples), format_number(s.bound), db(s.bound),
                             format_number(s.mse), db(s.mse), format_number(s.stderr_), format_number(s.oracle_mse),
                             db(s.oracle_mse)});
            w.file("parameters.csv", params.str());
            w.file("sources.csv", sources.str());
            w.file("summary.json", json{{"trials", r.trials},
                                        {"excluded", r.excluded},
                                        {"crlb_condition", r.crlb_condition}}
                                           .dump(2) +
                                       "\n");
        }

        inline int experiment(const Options &opt, std::ostream &out)
        {
            RunConfig base = preset_config(opt.experiment);
            const RunConfig rc = resolve(opt, base);
            if (rc.preset != opt.experiment)
                throw ConfigError("configuration selects preset '" + rc.preset + "' but the command runs '" +
                                  opt.experiment + "'");
            const ExperimentConfig &c = rc.experiment;
            validate_config(c);
            Writer w(opt, rc);

            if (opt.experiment == "exp1a" || opt.experiment == "exp2")
            {
                require_noise(c);
                const EstimationReport r = opt.experiment == "exp2" ? run_experiment2(c) : run_experiment1_part1(c);
                write_estimation_report(w, r);
                double worst = 0.0;
                for (const auto &p : r.parameters)
                    worst = std::max(worst, std::abs(to_db(p.mse) - to_db(p.crlb)));
                out << opt.experiment << ": " << r.trials << " trials, " << r.excluded
                    << " excluded, largest |MSE - CRLB| " << format_number(worst) << " dB\n";
                for (const auto &s : r.sources)
                    out << "  source " << s.source << ": bound " << to_db(s.bound) << " dB, MSE " << to_db(s.mse)
                        << " dB\n";
            }
            else if (opt.experiment == "exp1b")
            {
                require_noise(c);
                const SampleSizeReport r = run_experiment1_part2(c);
                CsvTable table;
                table.header = {"samples", "source", "bound", "bound_db", "mse", "mse_db", "stderr", "gap_db",
                                "oracle_mse_db"};
                for (const auto &s : r.rows)
                    table.add({std::to_string(s.samples), std::to_string(s.source), format_number(s.bound),
                               db(s.bound), format_number(s.mse), db(s.mse), format_number(s.stderr_),
                               format_number(to_db(s.mse) - to_db(s.bound)), db(s.oracle_mse)});
                CsvTable excl;
                excl.header = {"samples", "trials", "excluded"};
                for (std::size_t g = 0; g < c.sample_grid.size(); ++g)
                    excl.add({std::to_string(c.sample_grid[g]), std::to_string(r.trials),
                              std::to_string(r.excluded[g])});
                w.file("sample_size.csv", table.str());
                w.file("exclusions.csv", excl.str());
                out << "exp1b: " << c.sample_grid.size() << " sample sizes x " << r.trials << " trials\n";
            }
            else
            {
                const BerReport r = run_experiment3(c);
                CsvTable table;
                table.header = {"snr_db", "source", "receiver", "ber", "stderr", "errors", "bits"};
                for (const auto &b : r.rows)
                    table.add({format_number(b.snr_db), std::to_string(b.source), b.receiver, format_number(b.ber),
                               format_number(b.stderr_), std::to_string(b.errors), std::to_string(b.bits)});
                CsvTable excl;
                excl.header = {"snr_db", "noise_variance", "trials", "excluded"};
                for (std::size_t g = 0; g < c.snr_db.size(); ++g)
                    excl.add({format_number(c.snr_db[g]), format_number(noise_for_snr(c.mixing, c.snr_db[g])),
                              std::to_string(r.trials), std::to_string(r.excluded[g])});
                w.file("ber.csv", table.str());
                w.file("exclusions.csv", excl.str());
                out << "exp3: " << c.snr_db.size() << " SNR points x " << r.trials << " trials, T=" << r.samples
                    << "\n";
            }
            w.finish();
            return kExitOk;
        }
    } // namespace detail

    /// Parse argv and run one subcommand. Returns the process exit status.
    inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
    {
        CLI::App app{"Semi-blind ML estimation and MMSE separation of stationary sources", "semiblind"};
        app.set_version_flag("--version", SEMIBLIND_VERSION);
        app.require_subcommand(1);
        Options opt;

        auto common = [&](CLI::App *sub, bool needs_config)
        {
            auto *cfg = sub->add_option("--config", opt.config, "JSON configuration file");
            if (needs_config)
                cfg->required();
            sub->add_option("--seed", opt.seed, "master random seed (overrides the configuration)");
            sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        };

        auto *simulate = app.add_subcommand("simulate", "draw sources and mixtures from a configuration");
        common(simulate, true);
        auto *estimate = app.add_subcommand("estimate", "ML parameters and MMSE sources from a mixtures CSV");
        common(estimate, true);
        estimate->add_option("--data", opt.data, "L x T mixtures, one channel per line")->required();
        auto *crlb = app.add_subcommand("crlb", "Cramer-Rao bound of the configured model");
        common(crlb, true);
        auto *experiment = app.add_subcommand("experiment", "run a Monte-Carlo benchmark");
        common(experiment, false);
        experiment->add_option("name", opt.experiment, "exp1a, exp1b, exp2 or exp3")
            ->required()
            ->check(CLI::IsMember({"exp1a", "exp1b", "exp2", "exp3"}));
        experiment->add_option("--trials", opt.trials, "Monte-Carlo trials per point");
        experiment->add_option("--threads", opt.threads, "worker threads (0: all cores)");

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &e)
        {
            out << app.help();
            return kExitOk;
        }
        catch (const CLI::CallForVersion &)
        {
            out << SEMIBLIND_VERSION << "\n";
            return kExitOk;
        }
        catch (const CLI::ParseError &e)
        {
            err << "error: " << e.what() << "\n";
            return kExitUsage;
        }

        try
        {
            if (simulate->parsed())
                return detail::simulate(opt, out);
            if (estimate->parsed())
                return detail::estimate(opt, out, err);
            if (crlb->parsed())
                return detail::crlb_command(opt, out, err);
            return detail::experiment(opt, out);
        }
        catch (const ConfigError &e)
        {
            err << "configuration error: " << e.what() << "\n";
            return kExitConfig;
        }
        catch (const DataError &e)
        {
            err << "data error: " << e.what() << "\n";
            return kExitData;
        }
        catch (const NumericalError &e)
        {
            err << "numerical error: " << e.what() << "\n";
            return kExitNumerical;
        }
        catch (const DimensionError &e)
        {
            err << "data error: " << e.what() << "\n";
            return kExitData;
        }
        catch (const ValidationError &e)
        {
            err << "data error: " << e.what() << "\n";
            return kExitData;
        }
    }

} // namespace semiblind::cli
