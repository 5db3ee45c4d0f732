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

// CSV and JSON files. Matrices are written one channel per row; every number
// carries 17 significant digits so doubles survive the round trip.

#include "cli_config.hpp"

#include <filesystem>

namespace semiblind::cli
{
    inline std::string format_number(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    inline void write_text(const std::filesystem::path &path, const std::string &text)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw DataError("cannot write '" + path.string() + "'");
        out << text;
        if (!out)
            throw DataError("failed while writing '" + path.string() + "'");
    }

    inline std::string matrix_csv(const Matrix &m)
    {
        std::string s;
        for (Index r = 0; r < m.rows(); ++r)
        {
            for (Index c = 0; c < m.cols(); ++c)
            {
                if (c)
                    s += ',';
                s += format_number(m(r, c));
            }
            s += '\n';
        }
        return s;
    }

    /// A table with a header row. Cells are preformatted strings.
    struct CsvTable
    {
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;

        void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

        std::string str() const
        {
            auto line = [](const std::vector<std::string> &cells)
            {
                std::string s;
                for (std::size_t i = 0; i < cells.size(); ++i)
                    s += (i ? "," : "") + cells[i];
                return s + '\n';
            };
            std::string s = line(header);
            for (const auto &r : rows)
                s += line(r);
            return s;
        }
    };

    /// Numeric CSV without header, one channel per line.
    inline Matrix read_matrix_csv(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw DataError("cannot open data file '" + path + "'");
        std::vector<std::vector<double>> rows;
        std::string line;
        Index line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos)
                continue;
            std::vector<double> row;
            std::stringstream ss(line);
            std::string cell;
            Index col = 0;
            while (std::getline(ss, cell, ','))
            {
                ++col;
                std::size_t used = 0;
                double v = 0.0;
                try
                {
                    v = std::stod(cell, &used);
                }
                catch (const std::exception &)
                {
                    used = 0;
                }
                if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v))
                    throw DataError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(col) +
                                    " is not a finite number ('" + cell + "')");
                row.push_back(v);
            }
            if (!rows.empty() && row.size() != rows.front().size())
                throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(rows.front().size()) + " columns, found " +
                                std::to_string(row.size()));
            rows.push_back(std::move(row));
        }
        if (rows.empty())
            throw DataError("data file '" + path + "' holds no rows");
        Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
        return m;
    }

    // nlohmann's number output is shortest-round-trip; matrices go out as
    // row-major nested arrays.
    inline json matrix_json(const Matrix &m)
    {
        json rows = json::array();
        for (Index r = 0; r < m.rows(); ++r)
        {
            json row = json::array();
            for (Index c = 0; c < m.cols(); ++c)
                row.push_back(m(r, c));
            rows.push_back(row);
        }
        return rows;
    }

    inline json vector_json(const Vector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

    struct RunManifest
    {
        std::string config_digest;
        std::uint64_t seed = 0;
        std::string tool_version;
        std::vector<std::string> outputs;

        json to_json() const
        {
            return {{"config_digest", config_digest},
                    {"seed", seed},
                    {"tool_version", tool_version},
                    {"outputs", outputs}};
        }
    };

} // namespace semiblind::cli
