/**
 * @file io.hpp
 * @brief Grid dumps (64-byte ASCII header + little-endian f64) and CSV export.
 */
#pragma once

#include "levelflow/grid.hpp"

#include <string>

namespace levelflow {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

std::string grid_header(const Grid& g);
void write_grid(const std::string& path, const ScalarField& field);
ScalarField read_grid(const std::string& path);

/// Rows x[,y],value with values printed to round-trip precision.
void write_grid_csv(const std::string& path, const ScalarField& field);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

} // namespace levelflow
