#include "ajtwin/io/table.hpp"

#include <cmath>

#include "ajtwin/core/config.hpp"
#include "ajtwin/core/error.hpp"
#include "ajtwin/core/units.hpp"

namespace ajtwin {

namespace {

std::vector<std::string> split_cells(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

constexpr const char* kStateNames[] = {"d_a[um]", "V_l[mL]", "dr_tube[um]", "dr_nozzle[um]", "phi_A[1]"};
constexpr const char* kOutputNames[] = {"L_w[um]", "L_o[um]", "P_c[Pa]", "P_s[Pa]", "Q_m[sccm]"};
constexpr double kStateFactors[] = {units::um, units::mL, units::um, units::um, 1.0};
constexpr double kOutputFactors[] = {units::um, units::um, 1.0, 1.0, units::sccm};

std::string with_suffix(const std::string& header, const std::string& suffix) {
  const auto [name, unit] = split_column(header);
  return name + suffix + "[" + unit + "]";
}

}  // namespace

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name || columns[i].substr(0, columns[i].find('[')) == name) return static_cast<int>(i);
  return -1;
}

std::pair<std::string, std::string> split_column(const std::string& header) {
  const auto open = header.find('[');
  if (open == std::string::npos || open == 0 || header.back() != ']' || open + 2 > header.size() - 1)
    throw Error(ErrorKind::invalid_input, "column '" + header + "' lacks a [unit] suffix");
  return {header.substr(0, open), header.substr(open + 1, header.size() - open - 2)};
}

Table parse_table(const std::string& text) {
  Table table;
  std::size_t pos = 0;
  int line_no = 0;
  bool header = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      if (line.empty()) throw Error(ErrorKind::invalid_input, "table header is empty");
      table.columns = split_cells(line);
      for (const auto& c : table.columns) split_column(c);
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != table.columns.size())
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(table.columns.size()) + " cells, found " +
                                                std::to_string(cells.size()));
    auto& row = table.rows.emplace_back();
    for (const auto& cell : cells) {
      if (cell.empty()) row.emplace_back();
      else row.emplace_back(parse_double(cell));
    }
  }
  if (header) throw Error(ErrorKind::invalid_input, "table has no header");
  return table;
}

std::string format_table(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + table.columns[i];
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      if (row[i]) out += format_double(*row[i]);
    }
    out += "\n";
  }
  return out;
}

const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> columns = {"t[s]",    "I_A[mA]", "Q_c[sccm]", "Q_s[sccm]", "L_w[um]",
                                                   "L_o[um]", "P_c[Pa]", "P_s[Pa]",   "Q_m[sccm]"};
  return columns;
}

std::vector<TimeSeriesRecord> records_from_table(const Table& table) {
  const auto& expected = series_columns();
  if (table.columns != expected) {
    std::string diag = "expected header '";
    for (std::size_t i = 0; i < expected.size(); ++i) diag += (i ? "," : "") + expected[i];
    diag += "'";
    for (std::size_t i = 0; i < std::max(expected.size(), table.columns.size()); ++i) {
      const std::string want = i < expected.size() ? expected[i] : "(none)";
      const std::string got = i < table.columns.size() ? table.columns[i] : "(none)";
      if (want != got) {
        diag += "; column " + std::to_string(i + 1) + " is '" + got + "', expected '" + want + "'";
        break;
      }
    }
    throw Error(ErrorKind::invalid_input, diag);
  }
  std::vector<TimeSeriesRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto required = [&](int i) {
      if (!row[static_cast<std::size_t>(i)])
        throw Error(ErrorKind::invalid_input, "row " + std::to_string(r + 1) + ": missing " + expected[i]);
      return *row[static_cast<std::size_t>(i)];
    };
    TimeSeriesRecord rec;
    rec.t = required(0);
    rec.u = Input(required(1) * units::mA, required(2) * units::sccm, required(3) * units::sccm);
    for (int i = 0; i < kOutputCount; ++i) {
      const auto& cell = row[static_cast<std::size_t>(4 + i)];
      rec.observed.set(static_cast<std::size_t>(i), cell.has_value());
      rec.y.vector()(i) = cell ? *cell * kOutputFactors[i] : 0.0;
    }
    if (!records.empty() && !(rec.t > records.back().t))
      throw Error(ErrorKind::invalid_input, "row " + std::to_string(r + 1) + ": t must increase strictly");
    if (!std::isfinite(rec.t)) throw Error(ErrorKind::invalid_input, "row " + std::to_string(r + 1) + ": bad t");
    records.push_back(rec);
  }
  return records;
}

Table table_from_records(const std::vector<TimeSeriesRecord>& records) {
  Table table;
  table.columns = series_columns();
  for (const auto& rec : records) {
    auto& row = table.rows.emplace_back();
    row.emplace_back(rec.t);
    row.emplace_back(rec.u.I_A() / units::mA);
    row.emplace_back(rec.u.Q_c() / units::sccm);
    row.emplace_back(rec.u.Q_s() / units::sccm);
    for (int i = 0; i < kOutputCount; ++i) {
      if (rec.observed.test(static_cast<std::size_t>(i))) row.emplace_back(rec.y.vector()(i) / kOutputFactors[i]);
      else row.emplace_back();
    }
  }
  return table;
}

const std::vector<std::string>& state_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c = {"t[s]"};
    for (const char* name : kStateNames) c.emplace_back(name);
    return c;
  }();
  return columns;
}

std::vector<State> states_from_table(const Table& table) {
  if (table.columns != state_columns()) throw Error(ErrorKind::invalid_input, "not a state table");
  std::vector<State> states;
  states.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Vec5 x;
    for (int i = 0; i < kStateCount; ++i) {
      const auto& cell = table.rows[r][static_cast<std::size_t>(1 + i)];
      if (!cell) throw Error(ErrorKind::invalid_input, "row " + std::to_string(r + 1) + ": missing " + kStateNames[i]);
      x(i) = *cell * kStateFactors[i];
    }
    states.emplace_back(x);
  }
  return states;
}

Table state_table(const std::vector<double>& t, const std::vector<State>& states) {
  Table table;
  table.columns = state_columns();
  for (std::size_t k = 0; k < states.size(); ++k) {
    auto& row = table.rows.emplace_back();
    row.emplace_back(t[k]);
    for (int i = 0; i < kStateCount; ++i) row.emplace_back(states[k].vector()(i) / kStateFactors[i]);
  }
  return table;
}

Table belief_table(const std::vector<double>& t, const std::vector<GaussianBelief>& beliefs) {
  Table table;
  table.columns = {"t[s]"};
  for (const char* name : kStateNames) {
    table.columns.emplace_back(name);
    table.columns.push_back(with_suffix(name, "_lo"));
    table.columns.push_back(with_suffix(name, "_hi"));
  }
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    auto& row = table.rows.emplace_back();
    row.emplace_back(t[k]);
    for (int i = 0; i < kStateCount; ++i) {
      const double mean = beliefs[k].mean.vector()(i);
      const double band = 2.0 * std::sqrt(std::max(0.0, beliefs[k].covariance(i, i)));
      row.emplace_back(mean / kStateFactors[i]);
      row.emplace_back((mean - band) / kStateFactors[i]);
      row.emplace_back((mean + band) / kStateFactors[i]);
    }
  }
  return table;
}

Table forecast_table(double t0, double dt, const std::vector<OutputBelief>& forecast) {
  Table table;
  table.columns = {"t[s]", "I_A[mA]", "Q_c[sccm]", "Q_s[sccm]"};
  for (const char* name : kOutputNames) {
    table.columns.emplace_back(name);
    table.columns.push_back(with_suffix(name, "_lo"));
    table.columns.push_back(with_suffix(name, "_hi"));
  }
  for (std::size_t k = 0; k < forecast.size(); ++k) {
    const auto& f = forecast[k];
    auto& row = table.rows.emplace_back();
    row.emplace_back(t0 + static_cast<double>(k + 1) * dt);
    row.emplace_back(f.input.I_A() / units::mA);
    row.emplace_back(f.input.Q_c() / units::sccm);
    row.emplace_back(f.input.Q_s() / units::sccm);
    for (int i = 0; i < kOutputCount; ++i) {
      const double mean = f.mean.vector()(i);
      const double band = 2.0 * std::sqrt(std::max(0.0, f.covariance(i, i)));
      row.emplace_back(mean / kOutputFactors[i]);
      row.emplace_back((mean - band) / kOutputFactors[i]);
      row.emplace_back((mean + band) / kOutputFactors[i]);
    }
  }
  return table;
}

}  // namespace ajtwin
