#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <carerl/event_log.hpp>

using namespace carerl;

namespace {

ParseResult parse(const std::string& text, const LogFormatConfig& fmt = {}) {
  std::istringstream in(text);
  return parse_log(in, fmt);
}

const std::string kHeader = "client_id,date,aggression_type,involved,measures\n";

}  // namespace

TEST_CASE("well-formed rows parse into incidents", "[event-log]") {
  const auto r = parse(kHeader +
                       "c1,2015-01-01,va,2,talk to the client\n"
                       "c1,2015-01-03,pp,1,held with force;seclusion\n");
  REQUIRE(r.diagnostics.empty());
  REQUIRE(r.log.incidents.size() == 2);
  const auto& a = r.log.incidents[0];
  CHECK(a.client_id == "c1");
  CHECK(a.date.iso() == "2015-01-01");
  CHECK(a.aggression == Aggression::Va);
  CHECK(a.involved == "2");
  REQUIRE(a.measures.size() == 1);
  CHECK(a.measures[0] == Measure::TalkToClient);
  REQUIRE(r.log.incidents[1].measures.size() == 2);
}

TEST_CASE("each malformed row yields exactly one error diagnostic", "[event-log]") {
  const auto r = parse(kHeader +
                       "c1,2015-01-01,va,1,talk to the client\n"
                       "c1,2015-01-02,va,1\n"                      // column count
                       "c1,not-a-date,va,1,seclusion\n"            // date
                       "c1,2015-01-04,shouting,1,seclusion\n"      // aggression
                       "c1,2015-01-05,va,1,hug the client\n"       // measure
                       ",2015-01-06,va,1,seclusion\n"              // client id
                       "c1,2015-01-07,pp,2,no measure taken\n");
  CHECK(r.log.incidents.size() == 2);
  REQUIRE(r.diagnostics.size() == 5);
  CHECK(r.error_count() == 5);
  // line numbers count the header as line 1
  CHECK(r.diagnostics[0].line == 3);
  CHECK(r.diagnostics[1].line == 4);
  CHECK(r.diagnostics[4].line == 7);
  for (const auto& d : r.diagnostics) {
    CHECK_FALSE(d.warning);
    CHECK(d.render().rfind("line " + std::to_string(d.line) + ":", 0) == 0);
  }
}

TEST_CASE("duplicate measures are dropped with a warning, row kept", "[event-log]") {
  const auto r = parse(kHeader + "c1,2015-01-01,va,1,seclusion;seclusion;talk to the client\n");
  REQUIRE(r.log.incidents.size() == 1);
  REQUIRE(r.log.incidents[0].measures.size() == 2);
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(r.diagnostics[0].warning);
  CHECK(r.error_count() == 0);
}

TEST_CASE("empty measure cell parses as an empty list, not an error", "[event-log]") {
  const auto r = parse(kHeader + "c1,2015-01-01,va,1,\n");
  REQUIRE(r.log.incidents.size() == 1);
  CHECK(r.log.incidents[0].measures.empty());
  CHECK(r.diagnostics.empty());
}

TEST_CASE("header row is always skipped, never parsed", "[event-log]") {
  // a file whose header happens to look like data still loses its first line
  const auto r = parse("c9,2015-01-01,va,1,seclusion\nc1,2015-01-02,pp,1,seclusion\n");
  REQUIRE(r.log.incidents.size() == 1);
  CHECK(r.log.incidents[0].client_id == "c1");
}

TEST_CASE("alternate delimiters and date formats are honored", "[event-log]") {
  LogFormatConfig fmt;
  fmt.delimiter = ';';
  fmt.measure_delimiter = '|';
  fmt.date_format = DateFormat::DayMonthYear;
  const auto r = parse(
      "client_id;date;aggression_type;involved;measures\n"
      "c1;07/03/2015;va;1;seclusion|held with force\n",
      fmt);
  REQUIRE(r.diagnostics.empty());
  REQUIRE(r.log.incidents.size() == 1);
  CHECK(r.log.incidents[0].date.iso() == "2015-03-07");
  CHECK(r.log.incidents[0].measures.size() == 2);
}

TEST_CASE("iso-only format rejects day-month-year dates", "[event-log]") {
  LogFormatConfig fmt;
  fmt.date_format = DateFormat::Iso8601;
  const auto r = parse(kHeader + "c1,07/03/2015,va,1,seclusion\n", fmt);
  CHECK(r.log.incidents.empty());
  CHECK(r.error_count() == 1);
}

TEST_CASE("windows line endings parse the same as unix ones", "[event-log]") {
  const auto unix_r = parse(kHeader + "c1,2015-01-01,va,1,seclusion\n");
  const auto win_r = parse("client_id,date,aggression_type,involved,measures\r\n"
                           "c1,2015-01-01,va,1,seclusion\r\n");
  REQUIRE(win_r.diagnostics.empty());
  REQUIRE(win_r.log.incidents.size() == 1);
  CHECK(win_r.log.incidents[0].client_id == unix_r.log.incidents[0].client_id);
  CHECK(win_r.log.incidents[0].measures == unix_r.log.incidents[0].measures);
}

TEST_CASE("parse then serialize then parse is lossless", "[event-log]") {
  const std::string text = kHeader +
                           "c1,2015-01-01,va,2,talk to the client;seclusion\n"
                           "c1,2015-01-03,pp,1,held with force\n"
                           "c2,2015-02-11,sib,3,\n";
  const auto first = parse(text);
  REQUIRE(first.error_count() == 0);

  std::ostringstream out;
  serialize_log(first.log, out);
  const auto second = parse(out.str());
  REQUIRE(second.error_count() == 0);
  REQUIRE(second.log.incidents.size() == first.log.incidents.size());
  for (std::size_t i = 0; i < first.log.incidents.size(); ++i) {
    const auto& x = first.log.incidents[i];
    const auto& y = second.log.incidents[i];
    CHECK(x.client_id == y.client_id);
    CHECK(x.date.serial() == y.date.serial());
    CHECK(x.aggression == y.aggression);
    CHECK(x.involved == y.involved);
    CHECK(x.measures == y.measures);
  }
}

TEST_CASE("validation report counts categories over the parsed log", "[event-log]") {
  const auto r = parse(kHeader +
                       "c1,2015-01-01,va,1,talk to the client\n"
                       "c2,2015-01-02,va,1,seclusion\n"
                       "c2,2015-01-03,pp,1,seclusion\n");
  const auto v = validate_log(r.log);
  CHECK(v.aggression_counts[static_cast<int>(Aggression::Va)] == 2);
  CHECK(v.aggression_counts[static_cast<int>(Aggression::Pp)] == 1);
  CHECK(v.measure_counts[static_cast<int>(Measure::Seclusion)] == 2);
}
