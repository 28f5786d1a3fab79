#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pfl/sim.hpp"

namespace pfl {

// .pff: "PFF1", u32 width, u32 height, f64 dx, width*height f64 values.
// .pfs: "PFS1", u32 width, u32 height, f64 dx, f64 time, then cv, ci, eta.
// All little-endian, row-major.
std::vector<std::uint8_t> encode_pff(const ScalarField& f);
ScalarField decode_pff(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pfs(const PhaseState& s);
PhaseState decode_pfs(const std::vector<std::uint8_t>& bytes);

void write_pff(const ScalarField& f, const std::filesystem::path& file);
ScalarField read_pff(const std::filesystem::path& file);
void write_pfs(const PhaseState& s, const std::filesystem::path& file);
PhaseState read_pfs(const std::filesystem::path& file);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& file);
void write_file_bytes(const std::filesystem::path& file, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& file, const std::string& text);
std::string read_text_file(const std::filesystem::path& file);

std::string snapshot_file_name(long step);  // state_%06d.pfs
std::string frame_file_name(long index);    // frame_%06d.png
std::string mask_file_name(long step);      // mask_%06d.png

// Writes dir/state_%06d.pfs per snapshot and dir/trajectory.json.
void save_trajectory(const Trajectory& traj, const std::filesystem::path& dir);
Trajectory load_trajectory(const std::filesystem::path& dir);

}  // namespace pfl
