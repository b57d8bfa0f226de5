#include "lsw/catalog.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace lsw {

namespace {

constexpr std::string_view kHeader =
    "location;date;size;type;lat;lon;accuracy_km;rain_mm;humidity_pct;cloud_pct";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace((unsigned char)s.front())) s.remove_prefix(1);
  while (!s.empty() && std::isspace((unsigned char)s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::optional<double> parse_decimal(std::string_view field) {
  std::string text(trim(field));
  std::replace(text.begin(), text.end(), ',', '.');
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::optional<int> parse_int(std::string_view field) {
  int value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) return std::nullopt;
  return value;
}

bool valid_date(const Date& d) {
  if (d.year < 1900 || d.year > 2100 || d.month < 1 || d.month > 12 || d.day < 1) return false;
  static constexpr std::array<int, 12> lengths{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int max_day = lengths[(std::size_t)d.month - 1];
  const bool leap = d.year % 4 == 0 && (d.year % 100 != 0 || d.year % 400 == 0);
  if (d.month == 2 && leap) max_day = 29;
  return d.day <= max_day;
}

std::optional<Date> parse_date(std::string_view field) {
  field = trim(field);
  if (field.find('-') != std::string_view::npos) {
    const auto parts = split(field, '-');
    if (parts.size() != 3) return std::nullopt;
    const auto y = parse_int(trim(parts[0])), m = parse_int(trim(parts[1])),
               d = parse_int(trim(parts[2]));
    if (!y || !m || !d) return std::nullopt;
    const Date date{*y, *m, *d};
    return valid_date(date) ? std::optional(date) : std::nullopt;
  }
  const auto parts = split(field, '/');
  if (parts.size() != 3) return std::nullopt;
  const auto a = parse_int(trim(parts[0])), b = parse_int(trim(parts[1])),
             y = parse_int(trim(parts[2]));
  if (!a || !b || !y) return std::nullopt;
  // A component over 12 pins the day; otherwise month/day/year wins.
  Date date;
  if (*a > 12) {
    date = {*y, *b, *a};
  } else {
    date = {*y, *a, *b};
  }
  return valid_date(date) ? std::optional(date) : std::nullopt;
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

}  // namespace

std::int64_t days_from_civil(const Date& date) {
  int y = date.year;
  const int m = date.month;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = (unsigned)(y - era * 400);
  const unsigned doy = (153u * (unsigned)(m + (m > 2 ? -3 : 9)) + 2) / 5 + (unsigned)date.day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + (std::int64_t)doe - 719468;
}

Date civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = (unsigned)(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = (std::int64_t)yoe + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return Date{(int)(y + (m <= 2)), (int)m, (int)d};
}

std::string_view size_class_name(SizeClass s) {
  switch (s) {
    case SizeClass::small: return "small";
    case SizeClass::medium: return "medium";
    case SizeClass::large: return "large";
    case SizeClass::very_large: return "very_large";
    case SizeClass::catastrophic: return "catastrophic";
  }
  return "small";
}

std::optional<SizeClass> parse_size_class(std::string_view text) {
  std::string lower(trim(text));
  for (auto& c : lower) {
    c = (char)std::tolower((unsigned char)c);
    if (c == ' ' || c == '-') c = '_';
  }
  if (lower == "small") return SizeClass::small;
  if (lower == "medium") return SizeClass::medium;
  if (lower == "large") return SizeClass::large;
  if (lower == "very_large") return SizeClass::very_large;
  if (lower == "catastrophic") return SizeClass::catastrophic;
  return std::nullopt;
}

bool CatalogParseResult::has_errors() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const ParseDiagnostic& d) {
    return d.severity == ParseDiagnostic::Severity::error;
  });
}

CatalogParseResult parse_catalog(std::string_view text) {
  if (trim(text).empty()) throw ValidationError("catalog: empty file");

  CatalogParseResult result;
  std::size_t line_no = 0;
  bool saw_header = false;

  for (std::string_view rest = text; !rest.empty() || line_no == 0;) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = nl == std::string_view::npos ? rest : rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (nl == std::string_view::npos) break;
      continue;
    }
    if (!saw_header) {
      if (trim(line) != kHeader) {
        throw ValidationError("catalog: line 1 is not the expected header '" +
                              std::string(kHeader) + "'");
      }
      saw_header = true;
      continue;
    }

    auto fail = [&](std::string msg) {
      result.diagnostics.push_back(
          {line_no, ParseDiagnostic::Severity::error, std::move(msg)});
    };

    auto fields = split(line, ';');
    if (fields.size() < 6) {
      fail("expected at least 6 fields, got " + std::to_string(fields.size()));
      continue;
    }
    while (fields.size() < 10) fields.push_back({});

    CatalogEntry e;
    e.location_name = std::string(trim(fields[0]));
    if (e.location_name.empty()) {
      fail("empty location");
      continue;
    }
    const auto date = parse_date(fields[1]);
    if (!date) {
      fail("unparseable date '" + std::string(trim(fields[1])) + "'");
      continue;
    }
    e.event_date = *date;
    const auto size = parse_size_class(fields[2]);
    if (!size) {
      fail("unknown size class '" + std::string(trim(fields[2])) + "'");
      continue;
    }
    e.size_class = *size;
    e.event_type = std::string(trim(fields[3]));

    const auto lat = parse_decimal(fields[4]);
    const auto lon = parse_decimal(fields[5]);
    if (!lat || !lon) {
      fail("unparseable coordinate '" +
           std::string(trim(!lat ? fields[4] : fields[5])) + "'");
      continue;
    }
    if (*lat < -90.0 || *lat > 90.0) {
      fail("latitude " + format_double(*lat) + " outside [-90, 90]");
      continue;
    }
    if (*lon < -180.0 || *lon > 180.0) {
      fail("longitude " + format_double(*lon) + " outside [-180, 180]");
      continue;
    }
    e.latitude = *lat;
    e.longitude = *lon;
    if (*lat == *lon) {
      result.diagnostics.push_back({line_no, ParseDiagnostic::Severity::warning,
                                    "latitude equals longitude, possible data entry error"});
    }

    bool bad_optional = false;
    auto parse_optional = [&](std::string_view field, const char* name) -> std::optional<double> {
      if (trim(field).empty()) return std::nullopt;
      const auto v = parse_decimal(field);
      if (!v) {
        fail("unparseable " + std::string(name) + " '" + std::string(trim(field)) + "'");
        bad_optional = true;
      }
      return v;
    };
    e.accuracy_km = parse_optional(fields[6], "accuracy_km");
    e.rainfall_mm = parse_optional(fields[7], "rain_mm");
    e.humidity_pct = parse_optional(fields[8], "humidity_pct");
    e.cloud_cover_pct = parse_optional(fields[9], "cloud_pct");
    if (bad_optional) continue;

    result.entries.push_back(std::move(e));
    if (nl == std::string_view::npos) break;
  }
  if (!saw_header) throw ValidationError("catalog: empty file");
  return result;
}

std::string serialize_catalog(std::span<const CatalogEntry> entries) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& e : entries) {
    out += e.location_name;
    out += ';';
    out += format_date(e.event_date);
    out += ';';
    out += size_class_name(e.size_class);
    out += ';';
    out += e.event_type;
    out += ';';
    out += format_double(e.latitude);
    out += ';';
    out += format_double(e.longitude);
    for (const auto& opt :
         {e.accuracy_km, e.rainfall_mm, e.humidity_pct, e.cloud_cover_pct}) {
      out += ';';
      if (opt) out += format_double(*opt);
    }
    out += '\n';
  }
  return out;
}

std::vector<CatalogEntry> filter_catalog(std::span<const CatalogEntry> entries,
                                         const FilterCriteria& criteria) {
  std::vector<CatalogEntry> out;
  for (const auto& e : entries) {
    if (criteria.min_size_class && e.size_class < *criteria.min_size_class) continue;
    if (criteria.date_from && e.event_date < *criteria.date_from) continue;
    if (criteria.date_to && *criteria.date_to < e.event_date) continue;
    if (criteria.max_accuracy_km &&
        (!e.accuracy_km || *e.accuracy_km > *criteria.max_accuracy_km)) {
      continue;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace lsw
