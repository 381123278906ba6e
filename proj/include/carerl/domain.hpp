#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace carerl {

inline constexpr std::string_view kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Errors

struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyCorpus : std::runtime_error {
  explicit EmptyCorpus(const std::string& msg) : std::runtime_error(msg) {}
};
struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& msg) : std::runtime_error(msg) {}
};
struct NoActions : std::runtime_error {
  explicit NoActions(const std::string& msg) : std::runtime_error(msg) {}
};
struct UnreachableAction : std::runtime_error {
  explicit UnreachableAction(const std::string& msg) : std::runtime_error(msg) {}
};
struct DegenerateInput : std::runtime_error {
  explicit DegenerateInput(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptySample : std::runtime_error {
  explicit EmptySample(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// State and action alphabets.
//
// Enum order is the canonical order everywhere: serialization, argmax
// tie-breaks, and report layout all follow it.

enum class Aggression : std::uint8_t { Va = 0, Pp, Po, Sib };

enum class StateLabel : std::uint8_t { Va = 0, Pp, Po, Sib, Tau };

enum class Measure : std::uint8_t {
  TalkToClient = 0,
  HeldWithForce,
  NoMeasure,
  Seclusion,
  SendToRoom,
  DistractClient,
  TerminateContact,
  PreventiveMeasures,  // filtered out before any MDP sees it
};

inline constexpr int kNumAggressions = 4;
inline constexpr int kNumStates = 5;   // 4 aggression states + Tau
inline constexpr int kNumActions = 7;  // measures usable as MDP actions
inline constexpr int kNumMeasures = 8;
inline constexpr int kTauIndex = 4;

inline constexpr std::array<std::string_view, kNumStates> kStateNames = {
    "va", "pp", "po", "sib", "Tau"};

inline constexpr std::array<std::string_view, kNumMeasures> kMeasureNames = {
    "talk to the client", "held with force",   "no measure taken",
    "seclusion",          "send to another room", "distract client",
    "terminate contact",  "preventive measures started"};

// Short forms used when rendering variants in reports.
inline constexpr std::array<std::string_view, kNumMeasures> kMeasureDisplayNames = {
    "Talk with client", "Held with force",   "No measure", "Seclusion",
    "Send to other room", "Distract client", "Terminate contact",
    "Preventive measures"};

inline std::string_view to_string(StateLabel s) {
  return kStateNames[static_cast<int>(s)];
}
inline std::string_view to_string(Aggression a) {
  return kStateNames[static_cast<int>(a)];
}
inline std::string_view to_string(Measure m) {
  return kMeasureNames[static_cast<int>(m)];
}
inline std::string_view display_name(Measure m) {
  return kMeasureDisplayNames[static_cast<int>(m)];
}

inline StateLabel to_state(Aggression a) {
  return static_cast<StateLabel>(static_cast<std::uint8_t>(a));
}

inline std::string lowercase(std::string_view in) {
  std::string out(in);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::optional<Aggression> parse_aggression(std::string_view token) {
  const std::string t = lowercase(trim(token));
  if (t == "va") return Aggression::Va;
  if (t == "pp") return Aggression::Pp;
  if (t == "po") return Aggression::Po;
  if (t == "sib") return Aggression::Sib;
  return std::nullopt;
}

inline std::optional<StateLabel> parse_state(std::string_view token) {
  const std::string t = lowercase(trim(token));
  for (int i = 0; i < kNumStates; ++i)
    if (t == lowercase(kStateNames[i])) return static_cast<StateLabel>(i);
  return std::nullopt;
}

// Source tables spell the measures several ways; map the known variants onto
// the canonical tokens.
inline std::optional<Measure> parse_measure(std::string_view token) {
  const std::string t = lowercase(trim(token));
  for (int i = 0; i < kNumMeasures; ++i)
    if (t == kMeasureNames[i]) return static_cast<Measure>(i);
  if (t == "talk to client" || t == "talk with client" || t == "talking to the client")
    return Measure::TalkToClient;
  if (t == "hold with force" || t == "holding with force")
    return Measure::HeldWithForce;
  if (t == "none" || t == "no measure" || t == "no action")
    return Measure::NoMeasure;
  if (t == "secluded") return Measure::Seclusion;
  if (t == "send to other room" || t == "sent to another room")
    return Measure::SendToRoom;
  if (t == "client distracted" || t == "distract the client")
    return Measure::DistractClient;
  if (t == "contact terminated") return Measure::TerminateContact;
  if (t == "starting preventive measures" || t == "preventive measures")
    return Measure::PreventiveMeasures;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Calendar dates at day precision.

struct Date {
  int year = 0;
  int month = 0;  // 1..12
  int day = 0;    // 1..31

  bool ok() const {
    if (month < 1 || month > 12 || day < 1) return false;
    static constexpr int len[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int d = len[month - 1];
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) d = 29;
    return day <= d;
  }

  // Days since 1970-01-01 (civil calendar), valid for the proleptic Gregorian
  // calendar. Used for gap arithmetic.
  long serial() const {
    long y = year;
    const unsigned m = static_cast<unsigned>(month);
    const unsigned d = static_cast<unsigned>(day);
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
  }

  static Date from_serial(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
  }

  Date plus_days(long n) const { return from_serial(serial() + n); }

  std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  friend bool operator==(const Date& a, const Date& b) {
    return a.year == b.year && a.month == b.month && a.day == b.day;
  }
  friend bool operator<(const Date& a, const Date& b) { return a.serial() < b.serial(); }
};

inline long days_between(const Date& from, const Date& to) {
  return to.serial() - from.serial();
}

enum class DateFormat { Auto, Iso8601, DayMonthYear };

// Accepts YYYY-MM-DD and DD/MM/YYYY; Auto picks by separator.
inline std::optional<Date> parse_date(std::string_view token, DateFormat fmt = DateFormat::Auto) {
  const std::string t{trim(token)};
  int a = 0, b = 0, c = 0;
  char sep1 = 0, sep2 = 0;
  if (std::sscanf(t.c_str(), "%d%c%d%c%d", &a, &sep1, &b, &sep2, &c) != 5) return std::nullopt;
  if (sep1 != sep2) return std::nullopt;
  Date d;
  if (sep1 == '-' && (fmt == DateFormat::Auto || fmt == DateFormat::Iso8601)) {
    d = Date{a, b, c};
  } else if (sep1 == '/' && (fmt == DateFormat::Auto || fmt == DateFormat::DayMonthYear)) {
    d = Date{c, b, a};
  } else {
    return std::nullopt;
  }
  if (!d.ok()) return std::nullopt;
  return d;
}

}  // namespace carerl
