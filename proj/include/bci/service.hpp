#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bci/control.hpp"
#include "bci/pipeline.hpp"

namespace httplib {
class Server;
}

namespace bci {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  std::uint16_t stream_port = 0;  // 0 -> ephemeral
  std::uint16_t http_port = 0;    // 0 -> ephemeral
  std::size_t ring_size = 256;
  std::optional<std::filesystem::path> static_dir;
  // When false the loop only advances through step(); used by tests.
  bool run_clock = true;
};

// Telemetry/steering service. One simulation thread owns the ControlLoop;
// network handlers only enqueue events and read snapshots.
//
// Stream endpoint (TCP, newline-delimited JSON):
//   client -> server  {"type":"switch"} | {"type":"replay","dataset":"<dir>"}
//   server -> client  {"type":"frame", ...} per tick, plus
//                     {"type":"replay","events":k} / {"type":"error","message":...}
// HTTP endpoint: GET /state (latest frame), GET /frames (ring buffer).
class Service {
 public:
  Service(PipelineConfig config, Model model, FeatureSpec spec, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void start();
  void stop();

  std::uint16_t stream_port() const { return stream_port_; }
  std::uint16_t http_port() const { return http_port_; }

  // Advances one tick on the caller's thread (only when run_clock is false).
  TelemetryFrame step();
  std::vector<TelemetryFrame> buffered_frames() const;
  TelemetryFrame snapshot() const { return loop_.snapshot(); }

  // Classifies every trial of the dataset and queues one code event each.
  // Returns the number of queued events.
  std::size_t enqueue_replay(const std::filesystem::path& dataset);
  void enqueue_switch();
  std::size_t pending_events() const { return loop_.pending(); }
  std::size_t connected_clients() const;

 private:
  struct Client {
    int fd = -1;
    std::mutex write_mu;
    std::thread reader;
    std::atomic<bool> alive{true};
  };

  void accept_loop();
  void reap_clients();
  void clock_loop();
  void client_loop(Client* client);
  void publish(const TelemetryFrame& frame);
  void send_line(Client* client, const std::string& line);
  void handle_message(Client* client, const std::string& line);

  PipelineConfig config_;
  Model model_;
  FeatureSpec spec_;
  ServiceOptions options_;
  std::unique_ptr<DevicePort> port_;
  ControlLoop loop_;

  std::atomic<bool> running_{false};
  int listen_fd_ = -1;
  std::uint16_t stream_port_ = 0;
  std::uint16_t http_port_ = 0;
  std::thread accept_thread_;
  std::thread clock_thread_;
  std::thread http_thread_;
  std::unique_ptr<httplib::Server> http_;

  mutable std::mutex clients_mu_;
  std::list<std::unique_ptr<Client>> clients_;

  mutable std::mutex ring_mu_;
  std::deque<TelemetryFrame> ring_;
};

}  // namespace bci
