#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include <json.hpp>

#include "bci/control.hpp"

using namespace bci;
namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 16> kNames{"N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
                                             "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW"};

DigitalCode code(std::uint8_t bits) { return DigitalCode{bits}; }

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("converter") {
  CHECK(convert_code_to_switch(code(0b01)));
  CHECK(convert_code_to_switch(code(0b10)));
  CHECK(convert_code_to_switch(code(0b11)));
  CHECK_FALSE(convert_code_to_switch(code(0b00)));

  ControlLoop loop;
  std::vector<std::uint64_t> pulses;
  for (std::uint8_t b : {0b01, 0b00, 0b11, 0b00}) loop.enqueue({ControlEvent::Kind::Code, code(b)});
  for (int i = 0; i < 4; ++i) {
    const auto f = loop.tick();
    if (f.last_switch) pulses.push_back(f.tick);
  }
  CHECK(pulses == std::vector<std::uint64_t>{0, 2});
}

TEST_CASE("advance_direction") {
  DirectionState s;
  auto [one, h1] = advance_direction(s);
  CHECK(one.rose_index == 1);
  CHECK(to_string(static_cast<CompassPoint>(one.rose_index)) == "NNE");

  DirectionState e = s;
  HeadingVector h;
  for (int i = 0; i < 4; ++i) std::tie(e, h) = advance_direction(e);
  CHECK(static_cast<CompassPoint>(e.rose_index) == CompassPoint::E);
  CHECK(h.x == doctest::Approx(1.0));
  CHECK(h.y == doctest::Approx(0.0).scale(1.0));

  for (std::uint8_t start = 0; start < 16; ++start) {
    DirectionState cur{start};
    for (int i = 0; i < 16; ++i) cur = advance_direction(cur).first;
    CHECK(cur == DirectionState{start});
  }
}

TEST_CASE("compass rose") {
  for (std::size_t i = 0; i < 16; ++i) {
    const auto p = static_cast<CompassPoint>(i);
    CHECK(to_string(p) == kNames[i]);
    CHECK(compass_from_string(kNames[i]) == p);
    // Heading emitted for each state parses back to that state.
    const auto h = heading_of(DirectionState{static_cast<std::uint8_t>(i)});
    CHECK(h.x * h.x + h.y * h.y == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(heading_to_compass(h.x, h.y) == p);
  }
  CHECK_THROWS_AS(compass_from_string("NORTH"), InvalidInput);

  CHECK(heading_to_compass(1, 0) == CompassPoint::E);
  CHECK(heading_to_compass(0, 1) == CompassPoint::N);
  CHECK(heading_to_compass(0.3827, 0.9239) == CompassPoint::NNE);
  CHECK(heading_to_compass(0, -3) == CompassPoint::S);
  CHECK(heading_to_compass(-1, 0) == CompassPoint::W);
  CHECK(heading_to_compass(-1, 1) == CompassPoint::NW);
  CHECK_THROWS_AS(heading_to_compass(0, 0), InvalidInput);

  SUBCASE("exact boundaries round to the higher index") {
    for (int k = 0; k < 16; ++k) {
      const double deg = 11.25 + 22.5 * k;
      const double rad = deg * std::numbers::pi / 180.0;
      const auto got = heading_to_compass(std::sin(rad), std::cos(rad));
      CAPTURE(deg);
      CHECK(static_cast<int>(got) == (k + 1) % 16);
    }
  }
  SUBCASE("nearest direction by brute force") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 2000; ++rep) {
      const double x = u(rng), y = u(rng);
      std::size_t best = 0;
      double best_dot = -2.0;
      const double norm = std::hypot(x, y);
      for (std::size_t i = 0; i < 16; ++i) {
        const double th = i * 22.5 * std::numbers::pi / 180.0;
        const double dot = (x * std::sin(th) + y * std::cos(th)) / norm;
        if (dot > best_dot) best_dot = dot, best = i;
      }
      CHECK(static_cast<std::size_t>(heading_to_compass(x, y)) == best);
    }
  }
}

TEST_CASE("command words") {
  CHECK(compass_to_command(CompassPoint::N).bits() == "0000");
  CHECK(compass_to_command(CompassPoint::NNW).bits() == "1111");
  CHECK(compass_to_command(CompassPoint::E).bits() == "0100");
  for (std::uint8_t w = 0; w < 16; ++w) {
    CHECK(compass_to_command(command_to_compass(CommandWord{w})) == CommandWord{w});
    CHECK(static_cast<std::uint8_t>(command_to_compass(CommandWord{w})) == w);
  }
  CHECK_THROWS_AS(command_to_compass(CommandWord{16}), InvalidInput);
}

TEST_CASE("step_car") {
  CarState car;
  car.heading = {1.0, 0.0};
  car.speed_mps = 1.0;
  auto moved = step_car(car, 1.0);
  CHECK(moved.x_m == doctest::Approx(1.0));
  CHECK(moved.y_m == doctest::Approx(0.0));
  const auto same = step_car(car, 0.0);
  CHECK(same.x_m == car.x_m);
  CHECK(same.y_m == car.y_m);
  car.heading = {0.0, 1.0};
  car.speed_mps = 2.0;
  moved = step_car(car, 0.5);
  CHECK(moved.x_m == doctest::Approx(0.0));
  CHECK(moved.y_m == doctest::Approx(1.0));
  CHECK_THROWS_AS(step_car(car, -1.0), InvalidInput);

  SUBCASE("displacement equals speed times time without heading changes") {
    CarState c;
    c.heading = heading_of(DirectionState{5});
    c.speed_mps = 0.7;
    const CarState start = c;
    for (int i = 0; i < 400; ++i) c = step_car(c, 0.05);
    const double d = std::hypot(c.x_m - start.x_m, c.y_m - start.y_m);
    CHECK(d == doctest::Approx(0.7 * 20.0).epsilon(1e-9));
  }
}

TEST_CASE("command NDJSON") {
  const LoggedCommand c{17, CommandWord{6}};
  CHECK(command_ndjson(c) == R"({"tick":17,"word":"0110","compass":"SE"})");
  CHECK(parse_command_ndjson(command_ndjson(c)) == c);
  CHECK_THROWS_AS(parse_command_ndjson("{\"tick\":1}"), InvalidInput);
  CHECK_THROWS_AS(parse_command_ndjson("not json"), InvalidInput);
  CHECK_THROWS_AS(parse_command_ndjson(R"({"tick":1,"word":"0110","compass":"N"})"), InvalidInput);
}

TEST_CASE("loopback port") {
  LoopbackPort port;
  port.transmit(CommandWord{0}, 0);
  const auto ack = port.transmit(CommandWord{4}, 1);
  CHECK(ack.sequence == 1);
  REQUIRE(port.log().size() == 2);
  CHECK(port.log()[0] == LoggedCommand{0, CommandWord{0}});
  CHECK(port.log()[1] == LoggedCommand{1, CommandWord{4}});

  CHECK_THROWS_AS(port.transmit(CommandWord{1}, 1), PortError);
  CHECK_THROWS_AS(port.transmit(CommandWord{16}, 5), PortError);
  CHECK(port.log().size() == 2);
  port.close();
  CHECK_THROWS_AS(port.transmit(CommandWord{1}, 9), PortError);
  CHECK(port.log().size() == 2);

  LoopbackPort many;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> gap(1, 5), word(0, 15);
  std::uint64_t tick = 0;
  for (int i = 0; i < 1000; ++i) {
    tick += gap(rng);
    many.transmit(CommandWord{static_cast<std::uint8_t>(word(rng))}, tick);
  }
  CHECK(many.log().size() == 1000);
  for (std::size_t i = 1; i < many.log().size(); ++i) CHECK(many.log()[i].tick > many.log()[i - 1].tick);
}

TEST_CASE("file port") {
  const auto file = fs::temp_directory_path() / "bci_test_control_commands.ndjson";
  fs::remove(file);
  {
    FilePort port(file, true);
    port.transmit(CommandWord{0}, 0);
    port.transmit(CommandWord{15}, 3);
  }
  {
    FilePort port(file);  // appends
    port.transmit(CommandWord{2}, 4);
    port.close();
    CHECK_THROWS_AS(port.transmit(CommandWord{2}, 5), PortError);
  }
  const auto lines = read_lines(file);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == R"({"tick":0,"word":"0000","compass":"N"})");
  CHECK(parse_command_ndjson(lines[1]) == LoggedCommand{3, CommandWord{15}});
  CHECK(parse_command_ndjson(lines[2]) == LoggedCommand{4, CommandWord{2}});
  fs::remove(file);
  CHECK_THROWS_AS(FilePort(fs::path("/nonexistent-dir/x/y.ndjson")), PortError);
}

TEST_CASE("tcp port") {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(listener >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(listener, 1) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  const auto port_no = ntohs(addr.sin_port);

  std::string received;
  std::thread server([&] {
    const int fd = ::accept(listener, nullptr, nullptr);
    char buf[1024];
    for (ssize_t n; (n = ::recv(fd, buf, sizeof buf, 0)) > 0;) received.append(buf, static_cast<std::size_t>(n));
    ::close(fd);
  });
  {
    TcpPort port("127.0.0.1", port_no);
    port.transmit(CommandWord{1}, 10);
    port.transmit(CommandWord{2}, 11);
    port.close();
  }
  server.join();
  ::close(listener);
  CHECK(received == std::string(R"({"tick":10,"word":"0001","compass":"NNE"})") + "\n" +
                        R"({"tick":11,"word":"0010","compass":"NE"})" + "\n");
  CHECK_THROWS_AS(TcpPort("127.0.0.1", port_no), PortError);
}

TEST_CASE("control loop") {
  SUBCASE("each pulse advances exactly one step; idle ticks do not") {
    LoopbackPort port;
    ControlLoop loop({}, &port);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> pick(0, 4);
    int expected = 0;
    for (int i = 0; i < 300; ++i) {
      const int k = pick(rng);
      if (k == 4) {
        loop.enqueue({ControlEvent::Kind::Switch, {}});
      } else {
        loop.enqueue({ControlEvent::Kind::Code, code(static_cast<std::uint8_t>(k))});
      }
      const auto f = loop.tick();
      if (k != 0) expected = (expected + 1) % 16;
      CHECK(f.last_switch == (k != 0));
      CHECK(f.rose_index == expected);
      CHECK(port.log().back().word.value == expected);
    }
    for (int i = 0; i < 5; ++i) CHECK(loop.tick().rose_index == expected);
    CHECK(port.log().size() == 305);
  }
  SUBCASE("every movement code has the same effect") {
    std::vector<TelemetryFrame> runs[3];
    const std::uint8_t codes[3] = {0b01, 0b10, 0b11};
    std::mt19937_64 rng(3);
    std::vector<bool> pattern(60);
    for (auto&& b : pattern) b = rng() % 3 == 0;
    for (int r = 0; r < 3; ++r) {
      ControlLoop loop;
      for (bool b : pattern) {
        loop.enqueue({ControlEvent::Kind::Code, code(b ? codes[r] : 0)});
        runs[r].push_back(loop.tick());
      }
    }
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      CHECK(runs[0][i].rose_index == runs[1][i].rose_index);
      CHECK(runs[0][i].rose_index == runs[2][i].rose_index);
      CHECK(runs[0][i].x_m == runs[2][i].x_m);
      CHECK(runs[0][i].y_m == runs[1][i].y_m);
    }
  }
  SUBCASE("one event per tick, queued in order") {
    ControlLoop loop;
    for (int i = 0; i < 3; ++i) loop.enqueue({ControlEvent::Kind::Switch, {}});
    CHECK(loop.pending() == 3);
    loop.tick();
    CHECK(loop.pending() == 2);
    loop.tick();
    loop.tick();
    CHECK(loop.pending() == 0);
    CHECK(loop.direction().rose_index == 3);
  }
  SUBCASE("car moves continuously at the configured speed") {
    ControlLoop loop({10.0, 2.0});
    for (int i = 0; i < 10; ++i) loop.tick();
    CHECK(loop.car().y_m == doctest::Approx(2.0));
    CHECK(loop.snapshot().tick == 9);
  }
  SUBCASE("concurrent producers lose no events") {
    ControlLoop loop;
    std::vector<std::thread> producers;
    for (int p = 0; p < 4; ++p)
      producers.emplace_back([&] {
        for (int i = 0; i < 50; ++i) loop.enqueue({ControlEvent::Kind::Switch, {}});
      });
    for (auto& t : producers) t.join();
    for (int i = 0; i < 200; ++i) loop.tick();
    CHECK(loop.direction().rose_index == 200 % 16);
  }
  SUBCASE("frame NDJSON") {
    ControlLoop loop;
    loop.enqueue({ControlEvent::Kind::Code, code(0b10)});
    const auto line = frame_ndjson(loop.tick());
    const auto j = nlohmann::json::parse(line);
    CHECK(j["type"] == "frame");
    CHECK(j["tick"] == 0);
    CHECK(j["rose_index"] == 1);
    CHECK(j["compass"] == "NNE");
    CHECK(j["last_code"] == "10");
    CHECK(j["last_switch"] == 1);
  }
}
