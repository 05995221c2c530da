#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bci/classify.hpp"

namespace bci {

// 16-wind compass rose, clockwise from north.
enum class CompassPoint : std::uint8_t {
  N, NNE, NE, ENE, E, ESE, SE, SSE, S, SSW, SW, WSW, W, WNW, NW, NNW
};

inline constexpr std::size_t kRoseSize = 16;

std::string_view to_string(CompassPoint p);
CompassPoint compass_from_string(std::string_view s);

struct DirectionState {
  std::uint8_t rose_index = 0;
  bool operator==(const DirectionState&) const = default;
};

struct HeadingVector {
  double x = 0.0;  // east
  double y = 1.0;  // north
};

struct CommandWord {
  std::uint8_t value = 0;  // 0..15
  std::string bits() const;
  bool operator==(const CommandWord&) const = default;
};

struct CarState {
  double x_m = 0.0;
  double y_m = 0.0;
  HeadingVector heading;
  double speed_mps = 0.5;
};

// Converter: every movement code is the same trigger; only 00 is idle.
bool convert_code_to_switch(DigitalCode code);

HeadingVector heading_of(DirectionState state);
std::pair<DirectionState, HeadingVector> advance_direction(DirectionState state);

// Nearest rose direction to (x, y); exact bin boundaries go to the higher index.
CompassPoint heading_to_compass(double x, double y);

CommandWord compass_to_command(CompassPoint p);
CompassPoint command_to_compass(CommandWord w);

CarState step_car(const CarState& car, double dt_s);

// ---------------------------------------------------------------------------
// Simulated DAQ

struct LoggedCommand {
  std::uint64_t tick = 0;
  CommandWord word;
  bool operator==(const LoggedCommand&) const = default;
};

// {"tick":<int>,"word":"0000","compass":"N"}
std::string command_ndjson(const LoggedCommand& c);
LoggedCommand parse_command_ndjson(std::string_view line);

struct Acknowledgment {
  std::size_t sequence = 0;  // position in the port's log
  std::uint64_t tick = 0;
};

class PortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered command sink. Ticks must strictly increase; a failed transmit leaves
// the log unchanged.
class DevicePort {
 public:
  virtual ~DevicePort() = default;
  Acknowledgment transmit(CommandWord word, std::uint64_t tick);
  virtual void close() { open_ = false; }
  bool is_open() const { return open_; }
  const std::vector<LoggedCommand>& log() const { return log_; }

 protected:
  // Performs the physical write; throws PortError on failure.
  virtual void write(const LoggedCommand& c) = 0;

 private:
  bool open_ = true;
  std::vector<LoggedCommand> log_;
};

class LoopbackPort final : public DevicePort {
 protected:
  void write(const LoggedCommand&) override {}
};

class FilePort final : public DevicePort {
 public:
  explicit FilePort(std::filesystem::path file, bool truncate = false);
  void close() override;

 protected:
  void write(const LoggedCommand& c) override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class TcpPort final : public DevicePort {
 public:
  TcpPort(const std::string& host, std::uint16_t port);
  ~TcpPort() override;
  void close() override;

 protected:
  void write(const LoggedCommand& c) override;

 private:
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Control loop

struct ControlEvent {
  enum class Kind { Switch, Code };
  Kind kind = Kind::Switch;
  DigitalCode code;
};

struct TelemetryFrame {
  std::uint64_t tick = 0;
  double x_m = 0.0;
  double y_m = 0.0;
  std::uint8_t rose_index = 0;
  CompassPoint compass = CompassPoint::N;
  DigitalCode last_code;
  bool last_switch = false;
};

std::string frame_ndjson(const TelemetryFrame& f);

struct ControlConfig {
  double tick_hz = 20.0;
  double speed_mps = 0.5;
};

// Single-writer state machine. Producers call enqueue() from any thread; one
// owner calls tick(). Each tick consumes at most one queued event, applies the
// switch bit, transmits the current command word and advances the car.
class ControlLoop {
 public:
  explicit ControlLoop(ControlConfig config = {}, DevicePort* port = nullptr);

  void enqueue(ControlEvent e);
  std::size_t pending() const;
  TelemetryFrame tick();
  TelemetryFrame snapshot() const;
  DirectionState direction() const;
  CarState car() const;

 private:
  ControlConfig config_;
  DevicePort* port_;
  mutable std::mutex mu_;
  std::deque<ControlEvent> queue_;
  DirectionState direction_;
  CarState car_;
  TelemetryFrame last_;
  std::uint64_t next_tick_ = 0;
};

}  // namespace bci
