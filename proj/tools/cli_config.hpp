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

// JSON run configuration for the command-line tool.
//
//   {
//     "preset": "exp2",                       // optional base: exp1a|exp1b|exp2|exp3
//     "dims": {"sources": 2, "sensors": 5, "samples": 250},
//     "mixing": [[-0.727, -2.1943], ...],     // row-major, L rows
//     "noise": [1, 1, 1, 1, 1],               // or a single number for all sensors
//     "sources": [{"kind": "ar1", "a": 0.21},
//                 {"kind": "telegraph", "alpha": 0.25},
//                 {"kind": "spectrum", "values": [...]}],
//     "trials": 1000, "seed": 1, "threads": 0,
//     "sample_grid": [250, 500], "snr_db": [-20, 0, 20],
//     "estimation": {"normalize": false, "drop_dc": false, "common_noise": false, "center": false}
//   }
//
// Keys given in the document override the preset; "dims" may be omitted
// for L and M when "mixing" is given. Unknown keys are rejected.

#include "semiblind/experiments.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace semiblind::cli
{
    using json = nlohmann::json;

    class ConfigError : public Error
    {
    public:
        using Error::Error;
    };

    class DataError : public Error
    {
    public:
        using Error::Error;
    };

    struct EstimationSettings
    {
        bool normalize = false;
        bool drop_dc = false;
        bool common_noise = false;
        bool center = false; // subtract row means before estimation
    };

    struct RunConfig
    {
        std::string preset;
        ExperimentConfig experiment;
        EstimationSettings estimation;
    };

    inline const std::map<std::string, ExperimentConfig (*)()> &presets()
    {
        static const std::map<std::string, ExperimentConfig (*)()> table{
            {"exp1a", &preset_experiment1_part1},
            {"exp1b", &preset_experiment1_part2},
            {"exp2", &preset_experiment2},
            {"exp3", &preset_experiment3},
        };
        return table;
    }

    inline RunConfig preset_config(const std::string &name)
    {
        const auto it = presets().find(name);
        if (it == presets().end())
            throw ConfigError("unknown preset '" + name + "' (expected exp1a, exp1b, exp2 or exp3)");
        RunConfig rc;
        rc.preset = name;
        rc.experiment = it->second();
        if (name == "exp3")
            rc.estimation = {true, true, true, true};
        return rc;
    }

    namespace detail
    {
        inline double number(const json &j, const std::string &field)
        {
            if (!j.is_number())
                throw ConfigError("field '" + field + "' must be a number");
            return j.get<double>();
        }

        inline std::int64_t integer(const json &j, const std::string &field)
        {
            if (!j.is_number_integer())
                throw ConfigError("field '" + field + "' must be an integer");
            return j.get<std::int64_t>();
        }

        inline bool boolean(const json &j, const std::string &field)
        {
            if (!j.is_boolean())
                throw ConfigError("field '" + field + "' must be true or false");
            return j.get<bool>();
        }

        inline Vector number_array(const json &j, const std::string &field)
        {
            if (!j.is_array())
                throw ConfigError("field '" + field + "' must be an array of numbers");
            Vector v(static_cast<Index>(j.size()));
            for (std::size_t i = 0; i < j.size(); ++i)
                v[static_cast<Index>(i)] = number(j[i], field + "[" + std::to_string(i) + "]");
            return v;
        }

        inline void reject_unknown(const json &j, const std::set<std::string> &known, const std::string &where)
        {
            for (auto it = j.begin(); it != j.end(); ++it)
                if (!known.count(it.key()))
                    throw ConfigError("unknown field '" + where + it.key() + "'");
        }

        inline Matrix matrix(const json &j, const std::string &field)
        {
            if (!j.is_array() || j.empty())
                throw ConfigError("field '" + field + "' must be a non-empty array of rows");
            const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
            if (cols == 0)
                throw ConfigError("field '" + field + "' must be a non-empty array of rows");
            Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
            for (std::size_t r = 0; r < j.size(); ++r)
            {
                const std::string row = field + "[" + std::to_string(r) + "]";
                if (!j[r].is_array() || j[r].size() != cols)
                    throw ConfigError("field '" + row + "' must hold " + std::to_string(cols) + " numbers");
                for (std::size_t c = 0; c < cols; ++c)
                    m(static_cast<Index>(r), static_cast<Index>(c)) =
                        number(j[r][c], row + "[" + std::to_string(c) + "]");
            }
            return m;
        }

        inline SourceSpec source(const json &j, const std::string &field)
        {
            if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
                throw ConfigError("field '" + field + "' must be an object with a string 'kind'");
            const std::string kind = j["kind"].get<std::string>();
            auto need = [&](const char *key)
            {
                if (!j.contains(key))
                    throw ConfigError("field '" + field + "." + key + "' is required for kind '" + kind + "'");
                return j[key];
            };
            if (kind == "ar1")
            {
                reject_unknown(j, {"kind", "a"}, field + ".");
                return SourceSpec::ar1(number(need("a"), field + ".a"));
            }
            if (kind == "telegraph")
            {
                reject_unknown(j, {"kind", "alpha"}, field + ".");
                return SourceSpec::telegraph(number(need("alpha"), field + ".alpha"));
            }
            if (kind == "spectrum")
            {
                reject_unknown(j, {"kind", "values"}, field + ".");
                return {SourceKind::explicit_spectrum, 0.0, number_array(need("values"), field + ".values")};
            }
            throw ConfigError("field '" + field + ".kind' must be ar1, telegraph or spectrum (got '" + kind + "')");
        }
    } // namespace detail

    /// Apply a configuration document on top of `base` (a preset or defaults).
    inline RunConfig parse_config(const json &doc, RunConfig base = {})
    {
        using namespace detail;
        if (!doc.is_object())
            throw ConfigError("configuration must be a JSON object");
        reject_unknown(doc,
                       {"preset", "dims", "mixing", "noise", "sources", "trials", "seed", "threads", "sample_grid",
                        "snr_db", "estimation"},
                       "");
        RunConfig rc = std::move(base);
        if (doc.contains("preset"))
        {
            if (!doc["preset"].is_string())
                throw ConfigError("field 'preset' must be a string");
            rc = preset_config(doc["preset"].get<std::string>());
        }
        ExperimentConfig &c = rc.experiment;
        if (doc.contains("dims"))
        {
            const json &d = doc["dims"];
            if (!d.is_object())
                throw ConfigError("field 'dims' must be an object");
            reject_unknown(d, {"sources", "sensors", "samples"}, "dims.");
            if (d.contains("sources"))
                c.dims.sources = integer(d["sources"], "dims.sources");
            if (d.contains("sensors"))
                c.dims.sensors = integer(d["sensors"], "dims.sensors");
            if (d.contains("samples"))
                c.dims.samples = integer(d["samples"], "dims.samples");
        }
        if (doc.contains("mixing"))
        {
            c.mixing = matrix(doc["mixing"], "mixing");
            // Shape follows the matrix unless dims spell it out.
            const json *d = doc.contains("dims") ? &doc["dims"] : nullptr;
            if (!d || !d->contains("sensors"))
                c.dims.sensors = c.mixing.rows();
            if (!d || !d->contains("sources"))
                c.dims.sources = c.mixing.cols();
        }
        if (doc.contains("noise"))
        {
            const json &n = doc["noise"];
            if (n.is_number())
                c.noise = Vector::Constant(c.dims.sensors, n.get<double>());
            else
                c.noise = number_array(n, "noise");
        }
        if (doc.contains("sources"))
        {
            if (!doc["sources"].is_array())
                throw ConfigError("field 'sources' must be an array");
            c.sources.clear();
            for (std::size_t i = 0; i < doc["sources"].size(); ++i)
                c.sources.push_back(source(doc["sources"][i], "sources[" + std::to_string(i) + "]"));
        }
        if (doc.contains("trials"))
            c.trials = integer(doc["trials"], "trials");
        if (doc.contains("seed"))
        {
            if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
                throw ConfigError("field 'seed' must be a nonnegative integer");
            if (doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() < 0)
                throw ConfigError("field 'seed' must be a nonnegative integer");
            c.master_seed = doc["seed"].get<std::uint64_t>();
        }
        if (doc.contains("threads"))
        {
            const std::int64_t t = integer(doc["threads"], "threads");
            if (t < 0)
                throw ConfigError("field 'threads' must be >= 0");
            c.threads = static_cast<unsigned>(t);
        }
        if (doc.contains("sample_grid"))
        {
            const Vector g = number_array(doc["sample_grid"], "sample_grid");
            c.sample_grid.clear();
            for (Index i = 0; i < g.size(); ++i)
            {
                if (g[i] != std::floor(g[i]))
                    throw ConfigError("field 'sample_grid[" + std::to_string(i) + "]' must be an integer");
                c.sample_grid.push_back(static_cast<Index>(g[i]));
            }
        }
        if (doc.contains("snr_db"))
        {
            const Vector s = number_array(doc["snr_db"], "snr_db");
            c.snr_db.assign(s.data(), s.data() + s.size());
        }
        if (doc.contains("estimation"))
        {
            const json &e = doc["estimation"];
            if (!e.is_object())
                throw ConfigError("field 'estimation' must be an object");
            reject_unknown(e, {"normalize", "drop_dc", "common_noise", "center"}, "estimation.");
            if (e.contains("normalize"))
                rc.estimation.normalize = boolean(e["normalize"], "estimation.normalize");
            if (e.contains("drop_dc"))
                rc.estimation.drop_dc = boolean(e["drop_dc"], "estimation.drop_dc");
            if (e.contains("common_noise"))
                rc.estimation.common_noise = boolean(e["common_noise"], "estimation.common_noise");
            if (e.contains("center"))
                rc.estimation.center = boolean(e["center"], "estimation.center");
        }
        return rc;
    }

    /// Shape and range checks, reported as configuration errors. Commands
    /// that take T from a data file call this after filling it in.
    inline void validate_config(const ExperimentConfig &c)
    {
        try
        {
            c.validate();
        }
        catch (const Error &e)
        {
            throw ConfigError(std::string("invalid configuration: ") + e.what());
        }
    }

    inline RunConfig load_config(const std::string &path, RunConfig base = {})
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open configuration file '" + path + "'");
        json doc;
        try
        {
            doc = json::parse(in);
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError("malformed configuration '" + path + "': " + e.what());
        }
        return parse_config(doc, std::move(base));
    }

    /// Fully resolved configuration. `threads` is left out: it does not change results.
    inline json to_json(const RunConfig &rc)
    {
        const ExperimentConfig &c = rc.experiment;
        json j;
        j["dims"] = {{"sources", c.dims.sources}, {"sensors", c.dims.sensors}, {"samples", c.dims.samples}};
        json rows = json::array();
        for (Index r = 0; r < c.mixing.rows(); ++r)
        {
            json row = json::array();
            for (Index col = 0; col < c.mixing.cols(); ++col)
                row.push_back(c.mixing(r, col));
            rows.push_back(row);
        }
        j["mixing"] = rows;
        j["noise"] = std::vector<double>(c.noise.data(), c.noise.data() + c.noise.size());
        json sources = json::array();
        for (const auto &s : c.sources)
        {
            switch (s.kind)
            {
            case SourceKind::ar1: sources.push_back({{"kind", "ar1"}, {"a", s.parameter}}); break;
            case SourceKind::telegraph: sources.push_back({{"kind", "telegraph"}, {"alpha", s.parameter}}); break;
            case SourceKind::explicit_spectrum:
                sources.push_back(
                    {{"kind", "spectrum"},
                     {"values", std::vector<double>(s.values.data(), s.values.data() + s.values.size())}});
                break;
            }
        }
        j["sources"] = sources;
        j["trials"] = c.trials;
        j["seed"] = c.master_seed;
        j["sample_grid"] = c.sample_grid;
        j["snr_db"] = c.snr_db;
        j["estimation"] = {{"normalize", rc.estimation.normalize},
                           {"drop_dc", rc.estimation.drop_dc},
                           {"common_noise", rc.estimation.common_noise},
                           {"center", rc.estimation.center}};
        return j;
    }

    /// 64-bit FNV-1a of the canonical (key-sorted) dump, as 16 hex digits.
    inline std::string config_digest(const RunConfig &rc)
    {
        const std::string text = to_json(rc).dump();
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char ch : text)
        {
            h ^= ch;
            h *= 0x100000001b3ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

} // namespace semiblind::cli
