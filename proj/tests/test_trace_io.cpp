#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "peeler/errors.hpp"
#include "peeler/trace_io.hpp"
#include "support.hpp"

using namespace peeler;

namespace {

std::string serialize(const Trace& t) {
  std::ostringstream os;
  write_trace(t.manifest, t.events, os);
  return os.str();
}

Trace parse(const std::string& text) {
  std::istringstream is(text);
  return read_trace(is);
}

const std::string kHeader = R"(PEELER-TRACE v1 {"label":"benign","event_count":1,"duration":100})";

template <class E>
std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const E& e) {
    return e.what();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("random traces round-trip byte for byte") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Trace t = testing::random_trace(rng, rng() % 300);
    const std::string text = serialize(t);
    const Trace back = parse(text);
    CHECK(back.manifest == t.manifest);
    CHECK(back.events == t.events);
    CHECK(serialize(back) == text);
  }
}

TEST_CASE("single events round-trip through their line encoding") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const Event e = testing::random_event(rng, rng() % 1'000'000'000);
    const std::string line = encode_event(e);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(decode_event(line, 2) == e);
  }
}

TEST_CASE("file keys are written as hex strings") {
  const auto line = encode_event(make_file_rw(EventType::Read, 5, 1, 0xFFFFD2C128431110ull, 0xAB));
  CHECK(line.find(R"("file_key":"0xFFFFD2C128431110")") != std::string::npos);
  CHECK(line.find(R"("file_object":"0xAB")") != std::string::npos);
}

TEST_CASE("an empty trace body is valid") {
  const Trace t = parse("PEELER-TRACE v1 {\"label\":\"benign\",\"event_count\":0,\"duration\":0}\n");
  CHECK(t.events.empty());
  CHECK(t.manifest.label == Label::Benign);
  CHECK_FALSE(t.manifest.attack_onset);
}

TEST_CASE("malformed input raises ParseError with the line number") {
  const std::string ev = R"({"ts":10,"pid":1,"tid":0,"prov":"Thread","etype":"Start","parent_id":1})";

  SUBCASE("empty stream") {
    CHECK_THROWS_AS(parse(""), ParseError);
  }
  SUBCASE("missing header") {
    CHECK(error_of<ParseError>(ev + "\n").find("header") != std::string::npos);
  }
  SUBCASE("other version") {
    CHECK(error_of<ParseError>(R"(PEELER-TRACE v2 {"label":"benign","event_count":0,"duration":0})")
              .find("unsupported trace version") != std::string::npos);
  }
  SUBCASE("unknown manifest key") {
    CHECK_THROWS_AS(parse(R"(PEELER-TRACE v1 {"label":"benign","event_count":0,"duration":0,"x":1})"), ParseError);
  }
  SUBCASE("broken json on line 2") {
    try {
      parse(kHeader + "\n{\"ts\":10,\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("unknown event key") {
    const std::string bad = R"({"ts":10,"pid":1,"tid":0,"prov":"Thread","etype":"Start","parent_id":1,"color":3})";
    CHECK(error_of<ParseError>(kHeader + "\n" + bad + "\n").find("unknown key 'color'") != std::string::npos);
  }
  SUBCASE("unknown provider") {
    const std::string bad = R"({"ts":10,"pid":1,"tid":0,"prov":"Registry","etype":"Start"})";
    CHECK_THROWS_AS(parse(kHeader + "\n" + bad + "\n"), ParseError);
  }
  SUBCASE("malformed hex key") {
    const std::string bad = R"({"ts":10,"pid":1,"tid":0,"prov":"File","etype":"Read","file_key":"0xZZ","file_object":"0x1","io_size":1})";
    CHECK_THROWS_AS(parse(kHeader + "\n" + bad + "\n"), ParseError);
  }
}

TEST_CASE("schema violations raise SchemaError") {
  const std::string ev10 = R"({"ts":10,"pid":1,"tid":0,"prov":"Thread","etype":"Start","parent_id":1})";
  const std::string ev5 = R"({"ts":5,"pid":1,"tid":0,"prov":"Thread","etype":"End","parent_id":1})";
  const auto header = [](int count, int duration) {
    return "PEELER-TRACE v1 {\"label\":\"benign\",\"event_count\":" + std::to_string(count) +
           ",\"duration\":" + std::to_string(duration) + "}\n";
  };

  SUBCASE("etype invalid for provider") {
    const std::string bad = R"({"ts":10,"pid":1,"tid":0,"prov":"Process","etype":"Read"})";
    CHECK_THROWS_AS(parse(header(1, 100) + bad + "\n"), SchemaError);
  }
  SUBCASE("attributes of another variant") {
    const std::string bad = R"({"ts":10,"pid":1,"tid":0,"prov":"Thread","etype":"Start","io_size":4})";
    CHECK(error_of<SchemaError>(header(1, 100) + bad + "\n").find("variant mismatch") != std::string::npos);
  }
  SUBCASE("timestamps going backwards") {
    CHECK(error_of<SchemaError>(header(2, 100) + ev10 + "\n" + ev5 + "\n").find("line 3") != std::string::npos);
  }
  SUBCASE("event count mismatch") {
    CHECK_THROWS_AS(parse(header(2, 100) + ev10 + "\n"), SchemaError);
  }
  SUBCASE("duration before last event") {
    CHECK_THROWS_AS(parse(header(1, 9) + ev10 + "\n"), SchemaError);
  }
  SUBCASE("equal timestamps are allowed") {
    CHECK(parse(header(2, 100) + ev10 + "\n" + ev10 + "\n").events.size() == 2);
  }
}

TEST_CASE("file helpers report missing files as IoError") {
  CHECK_THROWS_AS(read_trace_file("/nonexistent/peeler/trace.pt"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "peeler_trace_io_test.pt";
  std::mt19937_64 rng(3);
  const Trace t = testing::random_trace(rng, 40);
  write_trace_file(path.string(), t.manifest, t.events);
  CHECK(read_trace_file(path.string()).events == t.events);
  std::filesystem::remove(path);
}

TEST_CASE("window partition properties") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    const Trace t = testing::random_trace(rng, 1 + rng() % 400);
    const Micros len = 1 + rng() % 20'000;
    const auto windows = window_partition(t.events, len);
    REQUIRE_FALSE(windows.empty());
    CHECK(windows.size() == t.events.back().timestamp / len + 1);
    std::size_t total = 0;
    const Event* next = t.events.data();
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& w = windows[i];
      CHECK(w.index == i);
      CHECK(w.start == i * len);
      CHECK(w.end == w.start + len);
      if (!w.events.empty()) CHECK(w.events.data() == next);
      for (const auto& e : w.events) {
        CHECK(e.timestamp >= w.start);
        CHECK(e.timestamp < w.end);
      }
      next += w.events.size();
      total += w.events.size();
    }
    CHECK(total == t.events.size());
  }
  CHECK(window_partition({}, 10).empty());
  CHECK_THROWS_AS(window_partition({}, 0), std::invalid_argument);
}

TEST_CASE("interior empty windows are kept") {
  const std::vector<Event> evs = {make_thread(EventType::Start, 1, 1, 1, 1), make_thread(EventType::End, 35, 1, 1, 1)};
  const auto w = window_partition(evs, 10);
  REQUIRE(w.size() == 4);
  CHECK(w[0].events.size() == 1);
  CHECK(w[1].events.empty());
  CHECK(w[2].events.empty());
  CHECK(w[3].events.size() == 1);
}

TEST_CASE("replay delivers every event in order") {
  std::mt19937_64 rng(9);
  const Trace t = testing::random_trace(rng, 200);
  std::vector<Micros> seen;
  const auto stats = replay(t.events, {}, [&](const Event& e) { seen.push_back(e.timestamp); });
  CHECK(stats.delivered == t.events.size());
  REQUIRE(seen.size() == t.events.size());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == t.events[i].timestamp);
}

TEST_CASE("timed replay honours the time scale") {
  const std::vector<Event> evs = {make_thread(EventType::Start, 0, 1, 1, 1),
                                  make_thread(EventType::End, 200'000, 1, 1, 1)};
  const auto stats = replay(evs, {ReplayMode::Timed, 0.1}, [](const Event&) {});
  CHECK(stats.delivered == 2);
  CHECK(stats.seconds >= 0.019);
  CHECK(stats.seconds < 1.0);
}

TEST_CASE("a throwing consumer stops the replay") {
  std::mt19937_64 rng(13);
  const Trace t = testing::random_trace(rng, 50);
  std::size_t calls = 0;
  CHECK_THROWS_AS(replay(t.events, {},
                         [&](const Event&) {
                           if (++calls == 10) throw std::runtime_error("stop");
                         }),
                  std::runtime_error);
  CHECK(calls == 10);
}
