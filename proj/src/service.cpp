#include "pfl/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <thread>
#include <vector>

#include "httplib.h"
#include "pfl/annot.hpp"
#include "pfl/extract.hpp"
#include "pfl/fileio.hpp"
#include "pfl/image.hpp"
#include "pfl/params.hpp"
#include "pfl/pipeline.hpp"
#include "pfl/slic.hpp"

namespace pfl {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kIdPattern = R"(([A-Za-z0-9_\-][A-Za-z0-9_.\-]*))";

struct HttpError : std::runtime_error {
  HttpError(int status, const std::string& what, std::string field = {})
      : std::runtime_error(what), status(status), field(std::move(field)) {}
  int status;
  std::string field;
};

// Raised from a progress callback when the service shuts down mid-job.
struct Interrupted {};

struct Job {
  std::string id;
  std::string kind;
  std::string status = "queued";
  double progress = 0.0;
  std::optional<std::string> result_ref;
  std::optional<std::string> error;
  std::string created;
  std::string updated;
  std::vector<LossReport> history;
};

ordered_json job_json(const Job& job, bool with_history) {
  ordered_json j;
  j["id"] = job.id;
  j["kind"] = job.kind;
  j["status"] = job.status;
  j["progress"] = job.progress;
  j["result_ref"] = job.result_ref ? ordered_json(*job.result_ref) : ordered_json(nullptr);
  j["error"] = job.error ? ordered_json(*job.error) : ordered_json(nullptr);
  j["created"] = job.created;
  j["updated"] = job.updated;
  if (with_history && job.kind == "learn") {
    auto h = ordered_json::array();
    for (const LossReport& r : job.history) {
      ordered_json row;
      row["mismatch"] = r.mismatch;
      row["penalty_lo"] = r.penalty_lo;
      row["penalty_hi"] = r.penalty_hi;
      row["total"] = r.diverged ? ordered_json(nullptr) : ordered_json(r.total);
      h.push_back(std::move(row));
    }
    j["history"] = std::move(h);
  }
  return j;
}

void write_atomically(const fs::path& file, const std::string& text) {
  const fs::path tmp = file.string() + ".tmp";
  write_text_file(tmp, text);
  fs::rename(tmp, file);
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw SchemaError("body", e.what());
  }
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(key, "missing");
  return *it;
}

double number(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (fallback) return *fallback;
    throw SchemaError(key, "missing");
  }
  if (!it->is_number() || !std::isfinite(it->get<double>())) throw SchemaError(key, "expected a finite number");
  return it->get<double>();
}

long integer(const json& j, const char* key, std::optional<long> fallback = std::nullopt) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (fallback) return *fallback;
    throw SchemaError(key, "missing");
  }
  if (!it->is_number_integer()) throw SchemaError(key, "expected an integer");
  return it->get<long>();
}

}  // namespace

struct Service::Impl {
  fs::path root;
  int workers = 1;
  long default_k = 400;
  httplib::Server server;

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::string, Job> jobs;
  std::deque<std::pair<std::string, std::function<void(const std::string&)>>> queue;
  bool stopping = false;
  long next_id = 1;
  std::vector<std::thread> pool;

  std::mutex store_mu;  // superpixel and annotation files

  explicit Impl(ServiceOptions options) : root(std::move(options.root)), default_k(20L * options.expected_voids) {
    workers = options.workers > 0 ? options.workers
                                  : std::max(1, static_cast<int>(std::thread::hardware_concurrency()) / 2);
    for (const char* dir : {"frames", "superpixels", "annotations", "params", "jobs"}) {
      fs::create_directories(root / dir);
    }
    recover_jobs();
    routes();
    for (int i = 0; i < workers; ++i) pool.emplace_back([this] { worker_loop(); });
  }

  ~Impl() { shutdown(); }

  void shutdown() {
    server.stop();
    {
      std::lock_guard lock(mu);
      stopping = true;
    }
    cv.notify_all();
    for (std::thread& t : pool) {
      if (t.joinable()) t.join();
    }
    pool.clear();
  }

  // Jobs that were queued or running when the previous process ended can
  // never finish.
  void recover_jobs() {
    for (const auto& e : fs::directory_iterator(root / "jobs")) {
      const fs::path file = e.path() / "job.json";
      if (!e.is_directory() || !fs::exists(file)) continue;
      Job job;
      try {
        const json j = json::parse(read_text_file(file));
        job.id = j.at("id").get<std::string>();
        job.kind = j.at("kind").get<std::string>();
        job.status = j.at("status").get<std::string>();
        job.progress = j.at("progress").get<double>();
        if (j.at("result_ref").is_string()) job.result_ref = j["result_ref"].get<std::string>();
        if (j.at("error").is_string()) job.error = j["error"].get<std::string>();
        job.created = j.at("created").get<std::string>();
        job.updated = j.at("updated").get<std::string>();
      } catch (const std::exception&) {
        continue;
      }
      if (job.status == "queued" || job.status == "running") {
        job.status = "failed";
        job.error = "interrupted";
        job.updated = utc_timestamp();
        persist(job);
      }
      std::smatch m;
      static const std::regex kNumbered(R"(job-(\d+))");
      if (std::regex_match(job.id, m, kNumbered)) next_id = std::max(next_id, std::stol(m[1]) + 1);
      jobs[job.id] = std::move(job);
    }
  }

  void persist(const Job& job) {
    write_atomically(root / "jobs" / job.id / "job.json", job_json(job, false).dump(2) + "\n");
  }

  fs::path job_dir(const std::string& id) const { return root / "jobs" / id; }

  std::string submit(const std::string& kind, const json& request, std::function<void(const std::string&)> body) {
    std::lock_guard lock(mu);
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06ld", next_id++);
    Job job;
    job.id = buf;
    job.kind = kind;
    job.created = job.updated = utc_timestamp();
    fs::create_directories(job_dir(job.id));
    write_text_file(job_dir(job.id) / "request.json", request.dump(2) + "\n");
    persist(job);
    jobs[job.id] = job;
    queue.emplace_back(job.id, std::move(body));
    cv.notify_one();
    return job.id;
  }

  void set_progress(const std::string& id, double p) {
    std::lock_guard lock(mu);
    if (stopping) throw Interrupted{};
    Job& job = jobs.at(id);
    job.progress = std::max(job.progress, std::min(1.0, p));
  }

  void finish(const std::string& id, const std::optional<std::string>& error) {
    std::lock_guard lock(mu);
    Job& job = jobs.at(id);
    if (error) {
      job.status = "failed";
      job.error = error;
    } else {
      job.status = "done";
      job.progress = 1.0;
      job.result_ref = "jobs/" + id;
    }
    job.updated = utc_timestamp();
    persist(job);
  }

  void worker_loop() {
    for (;;) {
      std::pair<std::string, std::function<void(const std::string&)>> task;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        task = std::move(queue.front());
        queue.pop_front();
        Job& job = jobs.at(task.first);
        job.status = "running";
        job.updated = utc_timestamp();
        persist(job);
      }
      try {
        task.second(task.first);
        finish(task.first, std::nullopt);
      } catch (const Interrupted&) {
        finish(task.first, "interrupted");
      } catch (const std::exception& e) {
        finish(task.first, std::string(e.what()));
      }
    }
  }

  // --- request helpers ---

  static void reply_json(httplib::Response& res, const std::string& body, int status = 200) {
    res.status = status;
    res.set_content(body, "application/json");
  }

  static void reply_error(httplib::Response& res, int status, const std::string& what, const std::string& field) {
    ordered_json j;
    j["error"] = what;
    if (!field.empty()) j["field"] = field;
    reply_json(res, j.dump() + "\n", status);
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const HttpError& e) {
        reply_error(res, e.status, e.what(), e.field);
      } catch (const SchemaError& e) {
        reply_error(res, 400, e.what(), e.path());
      } catch (const InvalidKError& e) {
        reply_error(res, 400, e.what(), "k");
      } catch (const pipeline::NotFoundError& e) {
        reply_error(res, 404, e.what(), "");
      } catch (const StaleAnnotationError& e) {
        reply_error(res, 409, e.what(), "superpixel_ref");
      } catch (const std::invalid_argument& e) {
        reply_error(res, 400, e.what(), "");
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what(), "");
      }
    };
  }

  fs::path frame_png(const std::string& id) const {
    const fs::path file = root / "frames" / (id + ".png");
    if (!fs::exists(file)) throw HttpError(404, "unknown frame " + id);
    return file;
  }

  SuperpixelMap stored_map(const std::string& id) {
    const fs::path file = root / "superpixels" / (id + ".json");
    std::lock_guard lock(store_mu);
    if (!fs::exists(file)) throw HttpError(404, "no superpixels for frame " + id);
    return load_superpixels(file.string());
  }

  ModelParams resolve_theta(const json& body) {
    const json& t = require(body, "theta");
    if (t.is_object()) return params_from_json(t, "theta");
    if (!t.is_string()) throw SchemaError("theta", "expected a parameter object or reference");
    const std::string ref = t.get<std::string>();
    if (!std::regex_match(ref, std::regex(kIdPattern))) throw SchemaError("theta", "malformed reference");
    const fs::path stored = root / "params" / (ref + ".json");
    if (fs::exists(stored)) return load_params(stored.string());
    {
      std::lock_guard lock(mu);
      auto it = jobs.find(ref);
      if (it != jobs.end() && it->second.kind == "learn" && it->second.status == "done") {
        return load_params((job_dir(ref) / "params.json").string());
      }
    }
    throw HttpError(404, "unknown parameter set " + ref, "theta");
  }

  // --- routes ---

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    const std::string id = kIdPattern;

    server.Get("/api/frames", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(root / "frames")) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      auto out = ordered_json::array();
      for (const fs::path& f : files) {
        const GrayImage img = read_png(f.string());
        ordered_json j;
        j["frame_id"] = f.stem().string();
        j["width"] = img.width;
        j["height"] = img.height;
        out.push_back(std::move(j));
      }
      reply_json(res, out.dump() + "\n");
    }));

    server.Get("/api/frames/" + id + R"(\.png)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto bytes = read_file_bytes(frame_png(req.matches[1]));
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    }));

    server.Post("/api/frames/" + id + "/superpixels",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string fid = req.matches[1];
                  const GrayImage img = read_png(frame_png(fid).string());
                  const json body = req.body.empty() ? json::object() : parse_body(req);
                  if (!body.is_object()) throw SchemaError("body", "expected an object");
                  SlicOptions opt;
                  opt.k = static_cast<int>(integer(body, "k", default_k));
                  opt.m = number(body, "m", opt.m);
                  opt.max_iter = static_cast<int>(integer(body, "max_iter", opt.max_iter));
                  if (!(opt.m > 0.0)) throw SchemaError("m", "must be > 0");
                  if (opt.max_iter < 0) throw SchemaError("max_iter", "must be >= 0");
                  const SuperpixelMap map = slic_segment(img, opt);
                  const std::string text = dump_superpixels(map) + "\n";
                  {
                    std::lock_guard lock(store_mu);
                    write_atomically(root / "superpixels" / (fid + ".json"), text);
                  }
                  reply_json(res, text);
                }));

    server.Get("/api/frames/" + id + "/superpixels", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string fid = req.matches[1];
      frame_png(fid);
      const fs::path file = root / "superpixels" / (fid + ".json");
      std::lock_guard lock(store_mu);
      if (!fs::exists(file)) throw HttpError(404, "no superpixels for frame " + fid);
      reply_json(res, read_text_file(file));
    }));

    server.Put("/api/frames/" + id + "/annotation", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string fid = req.matches[1];
      frame_png(fid);
      json body = parse_body(req);
      if (!body.is_object()) throw SchemaError("annotation", "expected an object");
      const SuperpixelMap map = [&] {
        try {
          return stored_map(fid);
        } catch (const HttpError&) {
          throw HttpError(409, "frame " + fid + " has no superpixels; segment it first", "superpixel_ref");
        }
      }();
      if (!body.contains("frame_id")) body["frame_id"] = fid;
      if (body["frame_id"] != fid) throw SchemaError("annotation.frame_id", "does not match the URL");
      if (!body.contains("author")) body["author"] = "";
      if (!body.contains("timestamp")) body["timestamp"] = utc_timestamp();
      if (!body.contains("erased")) body["erased"] = {{"width", map.width}, {"height", map.height}, {"runs", json::array()}};
      const json& ref = require(body, "superpixel_ref");
      if (!ref.is_string()) throw SchemaError("annotation.superpixel_ref", "expected a string");
      if (ref.get<std::string>() != content_hash(map)) {
        throw HttpError(409, "superpixel_ref is stale for frame " + fid, "superpixel_ref");
      }
      Annotation ann = annotation_from_json(body, &map);
      if (auto it = body.find("strokes"); it != body.end()) {
        const Mask brushed = rasterize_strokes(map.width, map.height, strokes_from_json(*it, "annotation.strokes"));
        auto bits = ann.erased.to_bitmap();
        const auto more = brushed.to_bitmap();
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = bits[i] | more[i];
        ann.erased = Mask::from_bitmap(map.width, map.height, bits);
      }
      const std::string text = dump_annotation(ann);
      {
        std::lock_guard lock(store_mu);
        write_atomically(root / "annotations" / (fid + ".json"), text);
      }
      reply_json(res, text);
    }));

    server.Get("/api/frames/" + id + "/annotation", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string fid = req.matches[1];
      const fs::path file = root / "annotations" / (fid + ".json");
      std::lock_guard lock(store_mu);
      if (!fs::exists(file)) throw HttpError(404, "no annotation for frame " + fid);
      reply_json(res, read_text_file(file));
    }));

    server.Post("/api/jobs/learn", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      auto spec = std::make_shared<pipeline::LearnSpec>(pipeline::learn_spec_from_json(body, root));
      const std::string jid = submit("learn", body, [this, spec](const std::string& job_id) {
        const fs::path dir = job_dir(job_id);
        pipeline::learn(*spec, dir / "params.json", dir / "history.csv",
                        [this, &job_id](long it, long total, const LossReport& r) {
                          {
                            std::lock_guard lock(mu);
                            jobs.at(job_id).history.push_back(r);
                          }
                          set_progress(job_id, total > 0 ? static_cast<double>(it) / total : 1.0);
                        });
      });
      reply_json(res, ordered_json{{"job_id", jid}}.dump() + "\n", 202);
    }));

    server.Post("/api/jobs/simulate", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.is_object()) throw SchemaError("body", "expected an object");
      auto spec = std::make_shared<pipeline::SimulateSpec>();
      spec->theta = resolve_theta(body);
      spec->dt = number(body, "dt");
      spec->steps = integer(body, "n_steps");
      spec->snapshot_every = integer(body, "snapshot_every", 1);
      if (!(spec->dt > 0.0)) throw SchemaError("dt", "must be > 0");
      if (spec->steps < 1) throw SchemaError("n_steps", "must be >= 1");
      if (spec->snapshot_every < 1) throw SchemaError("snapshot_every", "must be >= 1");
      const json& init = require(body, "init");
      if (!init.is_string()) throw SchemaError("init", "expected a frame id or .pfs reference");
      const double width = number(body, "interface_width", 2.0);
      if (!(width > 0.0)) throw SchemaError("interface_width", "must be > 0");
      const FrameData frame = pipeline::load_frame(root, init.get<std::string>(), "init");
      if (const auto* s = std::get_if<PhaseState>(&frame)) {
        spec->init = *s;
      } else {
        spec->init = extract_state(std::get<Mask>(frame), spec->theta, width);
      }
      const std::string jid = submit("simulate", body, [this, spec](const std::string& job_id) {
        const fs::path dir = job_dir(job_id);
        pipeline::simulate(*spec, dir, [this, &job_id](long s, long n) {
          set_progress(job_id, n > 0 ? 0.95 * static_cast<double>(s) / n : 0.95);
        });
        pipeline::render(dir, Channel::eta, dir / "frames");
      });
      reply_json(res, ordered_json{{"job_id", jid}}.dump() + "\n", 202);
    }));

    server.Post("/api/jobs/predict", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.is_object()) throw SchemaError("body", "expected an object");
      auto spec = std::make_shared<pipeline::PredictSpec>();
      spec->theta = resolve_theta(body);
      spec->dt = number(body, "dt");
      if (!(spec->dt > 0.0)) throw SchemaError("dt", "must be > 0");
      spec->threshold = number(body, "threshold", 0.5);
      spec->interface_width = number(body, "interface_width", 2.0);
      if (!(spec->interface_width > 0.0)) throw SchemaError("interface_width", "must be > 0");
      const json& init = require(body, "init");
      if (!init.is_string()) throw SchemaError("init", "expected an annotated frame id");
      spec->init = pipeline::annotated_mask(root, init.get<std::string>());
      const json& steps = require(body, "step_list");
      if (!steps.is_array() || steps.empty()) throw SchemaError("step_list", "expected a non-empty array");
      for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::string path = "step_list[" + std::to_string(i) + "]";
        if (!steps[i].is_number_integer() || steps[i].get<long>() < 0) throw SchemaError(path, "expected a step index");
        if (!spec->steps.empty() && steps[i].get<long>() <= spec->steps.back()) throw SchemaError(path, "must increase");
        spec->steps.push_back(steps[i].get<long>());
      }
      const std::string jid = submit("predict", body, [this, spec](const std::string& job_id) {
        pipeline::predict(*spec, job_dir(job_id) / "masks");
      });
      reply_json(res, ordered_json{{"job_id", jid}}.dump() + "\n", 202);
    }));

    server.Get("/api/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto out = ordered_json::array();
      std::lock_guard lock(mu);
      for (const auto& [jid, job] : jobs) out.push_back(job_json(job, false));
      reply_json(res, out.dump() + "\n");
    }));

    server.Get("/api/jobs/" + id, guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) throw HttpError(404, "unknown job " + std::string(req.matches[1]));
      reply_json(res, job_json(it->second, true).dump() + "\n");
    }));

    server.Get("/api/results/" + id + R"(/frame/(\d+)\.png)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string jid = req.matches[1];
                 std::string kind;
                 {
                   std::lock_guard lock(mu);
                   auto it = jobs.find(jid);
                   if (it == jobs.end()) throw HttpError(404, "unknown job " + jid);
                   if (it->second.status != "done") throw HttpError(404, "job " + jid + " has no results yet");
                   kind = it->second.kind;
                 }
                 const long k = std::stol(req.matches[2]);
                 const fs::path file = kind == "predict" ? job_dir(jid) / "masks" / mask_file_name(k)
                                                         : job_dir(jid) / "frames" / frame_file_name(k);
                 if (!fs::exists(file)) throw HttpError(404, "job " + jid + " has no frame " + std::to_string(k));
                 const auto bytes = read_file_bytes(file);
                 res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
               }));
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() = default;

bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

int Service::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() { impl_->shutdown(); }

int Service::worker_count() const { return impl_->workers; }

}  // namespace pfl
