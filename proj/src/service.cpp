#include "bci/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "bci/features.hpp"

namespace bci {

namespace {

std::uint16_t bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

std::unique_ptr<DevicePort> make_port(const PipelineConfig& config) {
  if (config.port == PortKind::Tcp) {
    const auto colon = config.port_target.rfind(':');
    return std::make_unique<TcpPort>(config.port_target.substr(0, colon),
                                     static_cast<std::uint16_t>(std::stoi(config.port_target.substr(colon + 1))));
  }
  if (config.port == PortKind::File && !config.port_target.empty())
    return std::make_unique<FilePort>(config.port_target);
  return std::make_unique<LoopbackPort>();
}

}  // namespace

Service::Service(PipelineConfig config, Model model, FeatureSpec spec, ServiceOptions options)
    : config_(std::move(config)),
      model_(std::move(model)),
      spec_(std::move(spec)),
      options_(std::move(options)),
      port_(make_port(config_)),
      loop_(config_.control, port_.get()) {}

Service::~Service() { stop(); }

void Service::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw StageError("serve", std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.stream_port);
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw StageError("serve", "invalid bind host " + options_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw StageError("serve", "cannot bind " + options_.host + ":" + std::to_string(options_.stream_port) + ": " + err);
  }
  stream_port_ = bound_port(listen_fd_);

  http_ = std::make_unique<httplib::Server>();
  http_->Get("/state", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(frame_ndjson(loop_.snapshot()), "application/json");
  });
  http_->Get("/frames", [this](const httplib::Request&, httplib::Response& res) {
    std::string body = "[";
    bool first = true;
    for (const auto& f : buffered_frames()) {
      if (!first) body += ",";
      body += frame_ndjson(f);
      first = false;
    }
    body += "]";
    res.set_content(body, "application/json");
  });
  if (options_.static_dir) http_->set_mount_point("/", options_.static_dir->string());
  int http_port = options_.http_port == 0 ? http_->bind_to_any_port(options_.host)
                                          : (http_->bind_to_port(options_.host, options_.http_port)
                                                 ? options_.http_port
                                                 : -1);
  if (http_port < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw StageError("serve", "cannot bind http " + options_.host + ":" + std::to_string(options_.http_port));
  }
  http_port_ = static_cast<std::uint16_t>(http_port);

  running_ = true;
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  // stop() is a no-op until the server loop is running.
  http_->wait_until_ready();
  accept_thread_ = std::thread([this] { accept_loop(); });
  if (options_.run_clock) clock_thread_ = std::thread([this] { clock_loop(); });
}

void Service::stop() {
  if (!running_.exchange(false)) return;
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (clock_thread_.joinable()) clock_thread_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  std::list<std::unique_ptr<Client>> clients;
  {
    std::lock_guard lock(clients_mu_);
    clients.swap(clients_);
  }
  for (auto& c : clients) {
    ::shutdown(c->fd, SHUT_RDWR);
    if (c->reader.joinable()) c->reader.join();
    ::close(c->fd);
  }
}

void Service::accept_loop() {
  while (running_) {
    reap_clients();
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    timeval timeout{1, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &timeout, sizeof timeout);
    auto client = std::make_unique<Client>();
    client->fd = fd;
    Client* raw = client.get();
    {
      std::lock_guard lock(clients_mu_);
      clients_.push_back(std::move(client));
    }
    raw->reader = std::thread([this, raw] { client_loop(raw); });
  }
}

void Service::reap_clients() {
  std::list<std::unique_ptr<Client>> dead;
  {
    std::lock_guard lock(clients_mu_);
    for (auto it = clients_.begin(); it != clients_.end();) {
      if (!(*it)->alive) {
        dead.push_back(std::move(*it));
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : dead) {
    if (c->reader.joinable()) c->reader.join();
    ::close(c->fd);
  }
}

void Service::clock_loop() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / config_.control.tick_hz));
  auto next = clock::now();
  while (running_) {
    publish(loop_.tick());
    next += period;
    std::this_thread::sleep_until(next);
  }
}

TelemetryFrame Service::step() {
  const auto frame = loop_.tick();
  publish(frame);
  return frame;
}

void Service::publish(const TelemetryFrame& frame) {
  {
    std::lock_guard lock(ring_mu_);
    ring_.push_back(frame);
    while (ring_.size() > options_.ring_size) ring_.pop_front();
  }
  const auto line = frame_ndjson(frame) + "\n";
  // Held while sending so reap_clients() cannot free a target mid-write.
  std::lock_guard lock(clients_mu_);
  for (auto& c : clients_)
    if (c->alive) send_line(c.get(), line);
}

void Service::send_line(Client* client, const std::string& line) {
  std::lock_guard lock(client->write_mu);
  std::size_t sent = 0;
  while (sent < line.size() && client->alive) {
    const auto n = ::send(client->fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      client->alive = false;
      return;
    }
    sent += static_cast<std::size_t>(n);
  }
}

void Service::client_loop(Client* client) {
  std::string buffer;
  char chunk[4096];
  while (running_ && client->alive) {
    pollfd p{client->fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, 50);
    if (ready <= 0) continue;
    const auto n = ::recv(client->fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) handle_message(client, line);
    }
  }
  client->alive = false;
}

void Service::handle_message(Client* client, const std::string& line) {
  auto reject = [&](const std::string& why) {
    nlohmann::ordered_json e{{"type", "error"}, {"message", why}};
    send_line(client, e.dump() + "\n");
  };
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    reject("malformed JSON");
    return;
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    reject("message needs a string \"type\"");
    return;
  }
  const auto type = msg["type"].get<std::string>();
  if (type == "switch") {
    enqueue_switch();
  } else if (type == "replay") {
    if (!msg.contains("dataset") || !msg["dataset"].is_string()) {
      reject("replay needs a \"dataset\" path");
      return;
    }
    try {
      const auto k = enqueue_replay(msg["dataset"].get<std::string>());
      nlohmann::ordered_json ack{{"type", "replay"}, {"events", k}};
      send_line(client, ack.dump() + "\n");
    } catch (const std::exception& e) {
      reject(std::string("replay failed: ") + e.what());
    }
  } else {
    reject("unknown message type '" + type + "'");
  }
}

void Service::enqueue_switch() { loop_.enqueue({ControlEvent::Kind::Switch, {}}); }

std::size_t Service::enqueue_replay(const std::filesystem::path& dataset) {
  const Dataset ds = load_dataset(dataset);
  const Matrix features = extract_features_batch(ds.trials, spec_);
  for (std::size_t i = 0; i < features.rows(); ++i)
    loop_.enqueue({ControlEvent::Kind::Code, encode_class(classify(model_, features.row(i)).label)});
  return features.rows();
}

std::vector<TelemetryFrame> Service::buffered_frames() const {
  std::lock_guard lock(ring_mu_);
  return {ring_.begin(), ring_.end()};
}

std::size_t Service::connected_clients() const {
  std::lock_guard lock(clients_mu_);
  std::size_t n = 0;
  for (const auto& c : clients_)
    if (c->alive) ++n;
  return n;
}

}  // namespace bci
