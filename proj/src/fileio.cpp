#include "pfl/fileio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "json.hpp"

namespace pfl {

namespace {

class ByteWriter {
 public:
  void tag(const char (&t)[5]) { bytes_.insert(bytes_.end(), t, t + 4); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void field(const ScalarField& f) {
    for (double d : f.values()) f64(d);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  void expect_tag(const char (&t)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, t, 4) != 0) throw std::runtime_error(std::string("expected ") + t + " header");
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  void field(ScalarField& f) {
    need(f.size() * 8);
    for (double& d : f.values()) d = f64();
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw std::runtime_error("trailing bytes in field file");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("field file truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string numbered(const char* fmt, long n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, n);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> encode_pff(const ScalarField& f) {
  ByteWriter w;
  w.tag("PFF1");
  w.u32(static_cast<std::uint32_t>(f.width()));
  w.u32(static_cast<std::uint32_t>(f.height()));
  w.f64(f.dx());
  w.field(f);
  return w.take();
}

ScalarField decode_pff(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_tag("PFF1");
  const int w = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  ScalarField f(w, h, r.f64());
  r.field(f);
  r.expect_end();
  return f;
}

std::vector<std::uint8_t> encode_pfs(const PhaseState& s) {
  s.validate();
  ByteWriter w;
  w.tag("PFS1");
  w.u32(static_cast<std::uint32_t>(s.width()));
  w.u32(static_cast<std::uint32_t>(s.height()));
  w.f64(s.dx());
  w.f64(s.time);
  w.field(s.cv);
  w.field(s.ci);
  w.field(s.eta);
  return w.take();
}

PhaseState decode_pfs(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_tag("PFS1");
  const int w = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  const double dx = r.f64();
  PhaseState s{ScalarField(w, h, dx), ScalarField(w, h, dx), ScalarField(w, h, dx), r.f64()};
  r.field(s.cv);
  r.field(s.ci);
  r.field(s.eta);
  r.expect_end();
  return s;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& file, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& file) {
  auto bytes = read_file_bytes(file);
  return {bytes.begin(), bytes.end()};
}

void write_pff(const ScalarField& f, const std::filesystem::path& file) { write_file_bytes(file, encode_pff(f)); }
ScalarField read_pff(const std::filesystem::path& file) { return decode_pff(read_file_bytes(file)); }
void write_pfs(const PhaseState& s, const std::filesystem::path& file) { write_file_bytes(file, encode_pfs(s)); }
PhaseState read_pfs(const std::filesystem::path& file) { return decode_pfs(read_file_bytes(file)); }

std::string snapshot_file_name(long step) { return numbered("state_%06ld.pfs", step); }
std::string frame_file_name(long index) { return numbered("frame_%06ld.png", index); }
std::string mask_file_name(long step) { return numbered("mask_%06ld.png", step); }

void save_trajectory(const Trajectory& traj, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["dt"] = traj.dt;
  manifest["theta"] = to_json(traj.theta);
  auto steps = nlohmann::ordered_json::array();
  auto files = nlohmann::ordered_json::array();
  for (const Snapshot& s : traj.snapshots) {
    const std::string name = snapshot_file_name(s.step);
    write_pfs(s.state, dir / name);
    steps.push_back(s.step);
    files.push_back(name);
  }
  manifest["steps"] = steps;
  manifest["files"] = files;
  write_text_file(dir / "trajectory.json", manifest.dump(2) + "\n");
}

Trajectory load_trajectory(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "trajectory.json"));
  Trajectory traj;
  traj.dt = manifest.at("dt").get<double>();
  traj.theta = params_from_json(manifest.at("theta"), "trajectory.theta");
  const auto& steps = manifest.at("steps");
  const auto& files = manifest.at("files");
  if (steps.size() != files.size()) throw SchemaError("trajectory.files", "length differs from steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    traj.snapshots.push_back({steps[i].get<long>(), read_pfs(dir / files[i].get<std::string>())});
  }
  return traj;
}

}  // namespace pfl
