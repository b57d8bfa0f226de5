#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsw/errors.hpp"

namespace lsw {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

// Days since 1970-01-01 for a proleptic-Gregorian civil date, and back.
std::int64_t days_from_civil(const Date& d);
Date civil_from_days(std::int64_t days);

enum class SizeClass { small, medium, large, very_large, catastrophic };

std::string_view size_class_name(SizeClass s);
std::optional<SizeClass> parse_size_class(std::string_view text);

struct CatalogEntry {
  std::string location_name;
  Date event_date;
  SizeClass size_class = SizeClass::small;
  std::string event_type;  // landslide, mudslide, debris flow, ...
  double latitude = 0.0;
  double longitude = 0.0;
  std::optional<double> accuracy_km;
  std::optional<double> rainfall_mm;
  std::optional<double> humidity_pct;
  std::optional<double> cloud_cover_pct;
};

struct ParseDiagnostic {
  enum class Severity { warning, error };
  std::size_t line = 0;  // 1-based line number in the input
  Severity severity = Severity::error;
  std::string message;
};

struct CatalogParseResult {
  std::vector<CatalogEntry> entries;      // rows that passed validation
  std::vector<ParseDiagnostic> diagnostics;

  bool has_errors() const;
};

// ';'-separated rows under the header
//   location;date;size;type;lat;lon;accuracy_km;rain_mm;humidity_pct;cloud_pct
// Decimals accept ',' or '.'; dates accept MM/DD/YYYY, DD/MM/YYYY (a component
// > 12 fixes the order, otherwise MM/DD wins) and ISO YYYY-MM-DD. Bad rows are
// reported with their line number and skipped. An empty file is an error.
CatalogParseResult parse_catalog(std::string_view text);

// Normalized form: '.' decimals, ISO dates, canonical size names.
std::string serialize_catalog(std::span<const CatalogEntry> entries);

struct FilterCriteria {
  std::optional<SizeClass> min_size_class;
  std::optional<Date> date_from;  // inclusive
  std::optional<Date> date_to;    // inclusive
  std::optional<double> max_accuracy_km;  // entries without accuracy fail this
};

std::vector<CatalogEntry> filter_catalog(std::span<const CatalogEntry> entries,
                                         const FilterCriteria& criteria);

}  // namespace lsw
