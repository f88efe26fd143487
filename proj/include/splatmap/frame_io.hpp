#pragma once

#include <string>
#include <vector>

#include "splatmap/frame.hpp"

namespace splatmap {

/// Frame directory layout, also the replay-ingestion format:
///   NNNNN.rgb.png    8-bit RGB
///   NNNNN.depth.bin  little-endian float32, row-major, meters (0 = invalid)
///   NNNNN.sem.bin    per pixel, 8 x (uint16 class index, float32 prob),
///                    the top-8 classes renormalized to sum 1
///   poses.txt        one 4x4 row-major camera-to-world matrix per line
/// Indices NNNNN are the frame's position in the sequence, zero-padded.
void export_frame(const std::string& dir, int index, const Frame& frame);
void append_pose(const std::string& dir, const Pose& pose);

/// Loads frames 0..N-1 from a directory written by export_frame. The class
/// count cannot be recovered from the top-8 records, so it is supplied.
std::vector<Frame> load_replay(const std::string& dir, int num_classes);

size_t replay_frame_count(const std::string& dir);

}  // namespace splatmap
