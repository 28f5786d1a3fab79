#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace pfl {

struct ServiceOptions {
  std::filesystem::path root;  // frames/, superpixels/, annotations/, params/, jobs/
  int workers = 0;             // 0: half the available cores, at least one
  // Superpixel requests without k use 20 superpixels per expected void.
  int expected_voids = 20;
};

// HTTP JSON API over a data directory. Learn, simulate and predict requests
// become jobs run FIFO on a worker pool; every job writes the same artifacts
// as its command-line twin under jobs/{id}/.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Returns false when the address cannot be bound.
  bool bind(const std::string& host, int port);
  // Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  // Blocks serving requests until stop().
  void serve();
  void wait_until_ready() const;
  void stop();

  int worker_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pfl
