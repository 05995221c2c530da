#include "bci/control.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <numbers>

#include <json.hpp>

namespace bci {

namespace {

constexpr std::array<std::string_view, kRoseSize> kWindNames{
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
    "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW"};

constexpr double kStepDeg = 360.0 / static_cast<double>(kRoseSize);

}  // namespace

std::string_view to_string(CompassPoint p) { return kWindNames[static_cast<std::size_t>(p) % kRoseSize]; }

CompassPoint compass_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kRoseSize; ++i)
    if (kWindNames[i] == s) return static_cast<CompassPoint>(i);
  throw InvalidInput("unknown compass point '" + std::string(s) + "'");
}

std::string CommandWord::bits() const {
  std::string s(4, '0');
  for (int b = 0; b < 4; ++b)
    if (value & (1u << (3 - b))) s[static_cast<std::size_t>(b)] = '1';
  return s;
}

bool convert_code_to_switch(DigitalCode code) { return (code.bits & 0b11) != 0; }

HeadingVector heading_of(DirectionState state) {
  const double theta = static_cast<double>(state.rose_index) * kStepDeg * std::numbers::pi / 180.0;
  return {std::sin(theta), std::cos(theta)};
}

std::pair<DirectionState, HeadingVector> advance_direction(DirectionState state) {
  DirectionState next{static_cast<std::uint8_t>((state.rose_index + 1) % kRoseSize)};
  return {next, heading_of(next)};
}

CompassPoint heading_to_compass(double x, double y) {
  if (x == 0.0 && y == 0.0) throw InvalidInput("heading_to_compass: zero vector has no direction");
  // atan2(x, y) measures clockwise from north.
  double deg = std::atan2(x, y) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  // Angles within round-off of a bin edge count as the edge, which belongs to
  // the higher index.
  constexpr double kEdgeSlackDeg = 1e-9;
  const auto idx =
      static_cast<std::size_t>(std::floor((deg + kStepDeg / 2.0 + kEdgeSlackDeg) / kStepDeg)) % kRoseSize;
  return static_cast<CompassPoint>(idx);
}

CommandWord compass_to_command(CompassPoint p) { return {static_cast<std::uint8_t>(p)}; }

CompassPoint command_to_compass(CommandWord w) {
  if (w.value >= kRoseSize) throw InvalidInput("command word out of range: " + std::to_string(w.value));
  return static_cast<CompassPoint>(w.value);
}

CarState step_car(const CarState& car, double dt_s) {
  if (!(dt_s >= 0.0)) throw InvalidInput("step_car: dt must be >= 0");
  CarState next = car;
  next.x_m += car.heading.x * car.speed_mps * dt_s;
  next.y_m += car.heading.y * car.speed_mps * dt_s;
  return next;
}

// ---------------------------------------------------------------------------

std::string command_ndjson(const LoggedCommand& c) {
  return "{\"tick\":" + std::to_string(c.tick) + ",\"word\":\"" + c.word.bits() + "\",\"compass\":\"" +
         std::string(to_string(command_to_compass(c.word))) + "\"}";
}

LoggedCommand parse_command_ndjson(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    LoggedCommand c;
    c.tick = j.at("tick").get<std::uint64_t>();
    const auto word = j.at("word").get<std::string>();
    if (word.size() != 4 || word.find_first_not_of("01") != std::string::npos)
      throw InvalidInput("command word must be four binary digits");
    c.word.value = static_cast<std::uint8_t>(std::stoi(word, nullptr, 2));
    if (compass_from_string(j.at("compass").get<std::string>()) != command_to_compass(c.word))
      throw InvalidInput("compass name does not match command word");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("command line: ") + e.what());
  }
}

Acknowledgment DevicePort::transmit(CommandWord word, std::uint64_t tick) {
  if (!open_) throw PortError("transmit on closed port");
  if (word.value >= kRoseSize) throw PortError("command word out of range");
  if (!log_.empty() && tick <= log_.back().tick)
    throw PortError("tick " + std::to_string(tick) + " does not follow " + std::to_string(log_.back().tick));
  LoggedCommand c{tick, word};
  write(c);
  log_.push_back(c);
  return {log_.size() - 1, tick};
}

FilePort::FilePort(std::filesystem::path file, bool truncate)
    : path_(std::move(file)),
      out_(path_, truncate ? std::ios::out | std::ios::trunc : std::ios::out | std::ios::app) {
  if (!out_) throw PortError("cannot open command log " + path_.string());
}

void FilePort::close() {
  out_.close();
  DevicePort::close();
}

void FilePort::write(const LoggedCommand& c) {
  const auto line = command_ndjson(c) + "\n";
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw PortError("write failed on " + path_.string());
}

TcpPort::TcpPort(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw PortError("cannot resolve " + host);
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  freeaddrinfo(res);
  if (fd_ < 0) throw PortError("cannot connect to " + host + ":" + std::to_string(port));
}

TcpPort::~TcpPort() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpPort::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  DevicePort::close();
}

void TcpPort::write(const LoggedCommand& c) {
  const auto line = command_ndjson(c) + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const auto n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw PortError(std::string("tcp send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

// ---------------------------------------------------------------------------

std::string frame_ndjson(const TelemetryFrame& f) {
  nlohmann::ordered_json j;
  j["type"] = "frame";
  j["tick"] = f.tick;
  j["x_m"] = f.x_m;
  j["y_m"] = f.y_m;
  j["rose_index"] = f.rose_index;
  j["compass"] = std::string(to_string(f.compass));
  const char code[3] = {(f.last_code.bits & 0b10) ? '1' : '0', (f.last_code.bits & 0b01) ? '1' : '0', 0};
  j["last_code"] = code;
  j["last_switch"] = f.last_switch ? 1 : 0;
  return j.dump();
}

ControlLoop::ControlLoop(ControlConfig config, DevicePort* port) : config_(config), port_(port) {
  if (!(config_.tick_hz > 0.0)) throw InvalidInput("tick rate must be > 0");
  if (!(config_.speed_mps >= 0.0)) throw InvalidInput("car speed must be >= 0");
  car_.speed_mps = config_.speed_mps;
  car_.heading = heading_of(direction_);
}

void ControlLoop::enqueue(ControlEvent e) {
  std::lock_guard lock(mu_);
  queue_.push_back(e);
}

std::size_t ControlLoop::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

TelemetryFrame ControlLoop::tick() {
  std::unique_lock lock(mu_);
  DigitalCode code;
  bool pulse = false;
  if (!queue_.empty()) {
    const auto e = queue_.front();
    queue_.pop_front();
    if (e.kind == ControlEvent::Kind::Switch) {
      pulse = true;
    } else {
      code = e.code;
      pulse = convert_code_to_switch(code);
    }
  }
  if (pulse) {
    auto [next, heading] = advance_direction(direction_);
    direction_ = next;
    car_.heading = heading;
  }
  const std::uint64_t tick = next_tick_++;
  const auto compass = static_cast<CompassPoint>(direction_.rose_index);
  if (port_) port_->transmit(compass_to_command(compass), tick);
  car_ = step_car(car_, 1.0 / config_.tick_hz);

  last_ = {tick, car_.x_m, car_.y_m, direction_.rose_index, compass, code, pulse};
  return last_;
}

TelemetryFrame ControlLoop::snapshot() const {
  std::lock_guard lock(mu_);
  return last_;
}

DirectionState ControlLoop::direction() const {
  std::lock_guard lock(mu_);
  return direction_;
}

CarState ControlLoop::car() const {
  std::lock_guard lock(mu_);
  return car_;
}

}  // namespace bci
