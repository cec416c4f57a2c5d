#include <doctest.h>

#include <filesystem>

#include "bpad/error.hpp"
#include "bpad/eventlog.hpp"
#include "bpad/util.hpp"

using namespace bpad;

namespace {

// The procurement excerpt: two traces, nine rows.
const char* kProcurementCsv =
    "case_id,timestamp,activity,user\n"
    "1,2015-03-21 12:38:39,PR Created,Roy\n"
    "1,2015-03-28 07:09:26,PR Released,Earl\n"
    "1,2015-04-07 22:36:15,PO Created,James\n"
    "1,2015-04-08 22:12:08,PO Released,Roy\n"
    "1,2015-04-21 16:59:49,Goods Receipt,Ryan\n"
    "2,2015-05-14 11:31:53,SC Created,Marilyn\n"
    "2,2015-05-21 09:21:26,SC Purchased,Emily\n"
    "2,2015-05-28 18:48:27,SC Approved,Roy\n"
    "2,2015-06-01 04:43:08,PO Created,Johnny\n";

EventLog small_log() {
  return EventLog({"user"}, {Trace{"a", {Event{"X", std::nullopt, {"u1"}}, Event{"Y", std::nullopt, {"u2"}}}},
                             Trace{"b", {Event{"Y", std::nullopt, {"u1"}}}}});
}

}  // namespace

TEST_CASE("procurement excerpt parses from CSV") {
  const auto log = parse_log(kProcurementCsv, LogFormat::Csv);
  CHECK(log.size() == 2);
  CHECK(log.activities().size() == 8);
  CHECK(log.attribute_alphabet(0).size() == 7);
  CHECK(log.max_trace_len() == 5);
  std::size_t rows = 0;
  for (const auto& t : log.traces()) rows += t.size();
  CHECK(rows == 9);
  CHECK(log.activities().at(0) == "PR Created");
  CHECK(log.trace(1).events[3].attributes[0] == "Johnny");
}

TEST_CASE("rows are ordered by timestamp within a case") {
  const auto log = parse_log(
      "case_id,timestamp,activity\n"
      "7,2020-01-02T00:00:00Z,B\n"
      "7,2020-01-01T00:00:00Z,A\n"
      "7,2020-01-01T00:00:00.500+00:00,C\n",
      LogFormat::Csv);
  REQUIRE(log.trace(0).size() == 3);
  CHECK(log.trace(0).events[0].activity == "A");
  CHECK(log.trace(0).events[1].activity == "C");
  CHECK(log.trace(0).events[2].activity == "B");
}

TEST_CASE("timestamps parse to epoch milliseconds") {
  CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0.0);
  CHECK(parse_timestamp("1970-01-02 00:00:01") == 86401000.0);
  CHECK(parse_timestamp("1970-01-01T01:00:00+01:00") == 0.0);
  CHECK(parse_timestamp("1970-01-01T00:00:00.250Z") == 250.0);
  CHECK_FALSE(parse_timestamp("yesterday").has_value());
}

TEST_CASE("JSONL and CSV round trips preserve the log") {
  const EventLog log({"user", "dept"},
                     {Trace{"c1", {Event{"Prüfen", "2021-01-01T00:00:00Z", {"Zoë", "a,b"}},
                                   Event{"say \"hi\"", "2021-01-01T00:00:01Z", {"日本", "x\ny"}}}},
                      Trace{"c2", {Event{"A", std::nullopt, {"", "z"}}}}});
  for (auto fmt : {LogFormat::Jsonl, LogFormat::Csv}) {
    CAPTURE(to_string(fmt));
    const auto text = serialize_log(log, fmt);
    CHECK(parse_log(text, fmt) == log);
    CHECK(serialize_log(parse_log(text, fmt), fmt) == text);
  }
}

TEST_CASE("XES import reads names, timestamps and order") {
  const char* xes = R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="case-1"/>
    <event><string key="concept:name" value="B"/><date key="time:timestamp" value="2020-01-02T00:00:00.000+00:00"/></event>
    <event><string key="concept:name" value="A"/><date key="time:timestamp" value="2020-01-01T00:00:00.000+00:00"/></event>
  </trace>
  <trace><string key="concept:name" value="case-2"/></trace>
  <trace>
    <string key="concept:name" value="case-3"/>
    <event><string key="concept:name" value="C"/></event>
  </trace>
</log>)";
  const auto log = parse_log(xes, LogFormat::Xes, "mem.xes");
  REQUIRE(log.size() == 2);
  CHECK(log.trace(0).case_id == "case-1");
  CHECK(log.trace(0).events[0].activity == "A");
  CHECK(log.trace(1).events[0].activity == "C");
  CHECK_THROWS_AS(serialize_log(log, LogFormat::Xes), Error);
}

TEST_CASE("XES errors name the element") {
  const char* xes = R"(<log><trace><string key="concept:name" value="t"/><event><int key="x" value="1"/></event></trace></log>)";
  try {
    parse_log(xes, LogFormat::Xes, "bad.xes");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("/log/trace[1]/event[1]") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_log("<log><trace>", LogFormat::Xes), DataError);
}

TEST_CASE("malformed input reports the line") {
  const std::string jsonl = R"({"case_id":"1","events":[{"activity":"A","timestamp":null,"attrs":{}}]})"
                            "\n{not json}\n";
  try {
    parse_log(jsonl, LogFormat::Jsonl, "in.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("in.jsonl:line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_log("case_id,activity\n1,A\n", LogFormat::Csv), DataError);
  CHECK_THROWS_AS(parse_log("case_id,timestamp,activity\n1,,A,extra\n", LogFormat::Csv), DataError);
  CHECK_THROWS_AS(parse_log("case_id,timestamp,activity\n1,,\"A\n", LogFormat::Csv), DataError);
}

TEST_CASE("log validation") {
  CHECK_THROWS_AS(EventLog({}, {}), DataError);
  CHECK_THROWS_AS(EventLog({}, {Trace{"a", {}}}), DataError);
  CHECK_THROWS_AS(EventLog({}, {Trace{"a", {Event{"", {}, {}}}}}), DataError);
  CHECK_THROWS_AS(EventLog({"u"}, {Trace{"a", {Event{"A", {}, {}}}}}), DataError);
  CHECK_THROWS_AS(EventLog({}, {Trace{"a", {Event{"A", {}, {}}}}, Trace{"a", {Event{"A", {}, {}}}}}), DataError);
}

TEST_CASE("alphabets follow first occurrence") {
  const auto log = small_log();
  CHECK(log.activities().values() == std::vector<std::string>{"X", "Y"});
  CHECK(log.attribute_alphabet(0).values() == std::vector<std::string>{"u1", "u2"});
  CHECK(log.find_case("b") == 1);
  CHECK_FALSE(log.find_case("zz").has_value());
  CHECK_THROWS_AS(Alphabet(std::vector<std::string>{"a", "a"}), DataError);
}

TEST_CASE("labels round trip and are checked against the log") {
  const auto log = small_log();
  auto labels = normal_labels(log, 4);
  labels.traces[0].anomaly = AnomalyRecord{"a", AnomalyType::IncorrectUser, {1}, {SlotRef{1, 1}}};
  labels.traces[0].slots[1][1] = true;
  check_label_consistency(labels);
  const auto text = serialize_labels(labels);
  CHECK(parse_labels(text) == labels);
  CHECK(text.find("\"pad\"") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "bpad_label_test";
  write_labels(labels, dir / "labels.jsonl");
  CHECK(read_labels(dir / "labels.jsonl", log) == labels);

  auto wrong = labels;
  wrong.traces[1].case_id = "nope";
  CHECK_THROWS_AS(check_labels_match(wrong, log), DataError);
  auto inconsistent = labels;
  inconsistent.traces[0].slots[1][1] = false;
  CHECK_THROWS_AS(check_label_consistency(inconsistent), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("atomic writes leave no temporary files") {
  const auto dir = std::filesystem::temp_directory_path() / "bpad_atomic_test";
  std::filesystem::remove_all(dir);
  atomic_write(dir / "sub" / "f.txt", "hello");
  CHECK(read_file(dir / "sub" / "f.txt") == "hello");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "sub")) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(read_file(dir / "missing"), DataError);
  std::filesystem::remove_all(dir);
}
