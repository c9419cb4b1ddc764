#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ajtwin/core/types.hpp"
#include "ajtwin/estimation/estimator.hpp"

namespace ajtwin {

// Comma-delimited table whose header cells read `name[unit]`. Values are kept
// in the display units of the header; empty cells are missing.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;

  // Full header or bare name; -1 if absent.
  int column(const std::string& name) const;
};

Table parse_table(const std::string& text);
std::string format_table(const Table& table);

// Splits `L_w[um]` into ("L_w", "um"); throws Error(invalid_input) without a unit.
std::pair<std::string, std::string> split_column(const std::string& header);

// The input/output schema: t, inputs, then outputs.
const std::vector<std::string>& series_columns();

// Checks the header against series_columns() and converts to SI. Missing
// outputs clear the observed bit; inputs and t are mandatory. t must increase.
std::vector<TimeSeriesRecord> records_from_table(const Table& table);
Table table_from_records(const std::vector<TimeSeriesRecord>& records);

const std::vector<std::string>& state_columns();
Table state_table(const std::vector<double>& t, const std::vector<State>& states);
// Inverse of state_table; every cell is required.
std::vector<State> states_from_table(const Table& table);

// Mean and mean ± 2σ for every state.
Table belief_table(const std::vector<double>& t, const std::vector<GaussianBelief>& beliefs);
Table forecast_table(double t0, double dt, const std::vector<OutputBelief>& forecast);

}  // namespace ajtwin
