#pragma once

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "carerl/domain.hpp"

namespace carerl {

// One reported incident: who, when, which aggression type, free-text
// "involved" metadata, and the measures staff recorded (possibly none).
struct Incident {
  std::string client_id;
  Date date;
  Aggression aggression = Aggression::Va;
  std::string involved;
  std::vector<Measure> measures;  // de-duplicated, parse order preserved
};

struct EventLog {
  std::vector<Incident> incidents;  // file order, needed for same-day ties
  std::string source;
};

struct LogFormatConfig {
  char delimiter = ',';
  char measure_delimiter = ';';
  DateFormat date_format = DateFormat::Auto;
};

enum class DiagnosticKind {
  MalformedRow,
  BadDate,
  UnknownAggression,
  UnknownMeasure,
  DuplicateMeasure,  // warning: row kept, duplicate dropped
  EmptyClient,
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based, header is line 1
  DiagnosticKind kind = DiagnosticKind::MalformedRow;
  std::string message;
  bool warning = false;

  std::string render() const {
    std::ostringstream os;
    os << "line " << line << ": " << message;
    return os.str();
  }
};

struct ParseResult {
  EventLog log;
  std::vector<Diagnostic> diagnostics;

  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& d : diagnostics)
      if (!d.warning) ++n;
    return n;
  }
};

namespace detail {

inline std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

// Parses header-prefixed delimited text with columns
//   client_id, date, aggression_type, involved, measures
// where the measures cell is a `measure_delimiter`-separated list. Malformed
// rows are skipped but each produces exactly one diagnostic carrying its line
// number; nothing is dropped silently.
inline ParseResult parse_log(std::istream& in, const LogFormatConfig& fmt = {},
                             std::string source = "<stream>") {
  ParseResult result;
  result.log.source = std::move(source);

  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      saw_header = true;  // header row required; content not interpreted
      continue;
    }
    if (trim(line).empty()) continue;

    const auto cells = detail::split(line, fmt.delimiter);
    if (cells.size() != 5) {
      std::ostringstream msg;
      msg << "malformed row: expected 5 columns, got " << cells.size();
      result.diagnostics.push_back({lineno, DiagnosticKind::MalformedRow, msg.str(), false});
      continue;
    }

    Incident inc;
    inc.client_id = std::string(trim(cells[0]));
    if (inc.client_id.empty()) {
      result.diagnostics.push_back(
          {lineno, DiagnosticKind::EmptyClient, "malformed row: empty client id", false});
      continue;
    }

    const auto date = parse_date(cells[1], fmt.date_format);
    if (!date) {
      result.diagnostics.push_back(
          {lineno, DiagnosticKind::BadDate, "bad date '" + std::string(trim(cells[1])) + "'", false});
      continue;
    }
    inc.date = *date;

    const auto agg = parse_aggression(cells[2]);
    if (!agg) {
      result.diagnostics.push_back({lineno, DiagnosticKind::UnknownAggression,
                                    "unknown aggression type '" + std::string(trim(cells[2])) + "'",
                                    false});
      continue;
    }
    inc.aggression = *agg;

    inc.involved = std::string(trim(cells[3]));

    bool row_ok = true;
    if (!trim(cells[4]).empty()) {
      for (const auto& cell : detail::split(cells[4], fmt.measure_delimiter)) {
        if (trim(cell).empty()) continue;
        const auto m = parse_measure(cell);
        if (!m) {
          result.diagnostics.push_back({lineno, DiagnosticKind::UnknownMeasure,
                                        "unknown measure '" + std::string(trim(cell)) + "'", false});
          row_ok = false;
          break;
        }
        if (std::find(inc.measures.begin(), inc.measures.end(), *m) != inc.measures.end()) {
          result.diagnostics.push_back({lineno, DiagnosticKind::DuplicateMeasure,
                                        "duplicate measure '" + std::string(to_string(*m)) +
                                            "' dropped",
                                        true});
          continue;
        }
        inc.measures.push_back(*m);
      }
    }
    if (!row_ok) continue;

    result.log.incidents.push_back(std::move(inc));
  }
  return result;
}

// Canonical form: ISO dates, canonical measure tokens. parse(serialize(x))
// reproduces the (client, date, aggression, measures) tuples exactly.
inline void serialize_log(const EventLog& log, std::ostream& out,
                          const LogFormatConfig& fmt = {}) {
  const char d = fmt.delimiter;
  out << "client_id" << d << "date" << d << "aggression_type" << d << "involved" << d
      << "measures\n";
  for (const auto& inc : log.incidents) {
    out << inc.client_id << d << inc.date.iso() << d << to_string(inc.aggression) << d
        << inc.involved << d;
    for (std::size_t i = 0; i < inc.measures.size(); ++i) {
      if (i) out << fmt.measure_delimiter;
      out << to_string(inc.measures[i]);
    }
    out << '\n';
  }
}

struct ValidationReport {
  std::array<std::size_t, kNumAggressions> aggression_counts{};
  std::array<std::size_t, kNumMeasures> measure_counts{};
  std::size_t incidents = 0;
  std::size_t incidents_without_measures = 0;
  std::size_t distinct_clients = 0;
};

inline ValidationReport validate_log(const EventLog& log) {
  ValidationReport r;
  r.incidents = log.incidents.size();
  std::vector<std::string_view> clients;
  clients.reserve(log.incidents.size());
  for (const auto& inc : log.incidents) {
    r.aggression_counts[static_cast<int>(inc.aggression)]++;
    for (Measure m : inc.measures) r.measure_counts[static_cast<int>(m)]++;
    if (inc.measures.empty()) r.incidents_without_measures++;
    clients.push_back(inc.client_id);
  }
  std::sort(clients.begin(), clients.end());
  r.distinct_clients = std::unique(clients.begin(), clients.end()) - clients.begin();
  return r;
}

}  // namespace carerl
