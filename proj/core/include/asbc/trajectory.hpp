#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace asbc {

struct RawFrame {
  double t = 0.0;        // seconds
  double x = 0.0;        // front-bumper position, meters
  double v = 0.0;        // speed, m/s
  int preceding_id = 0;  // 0: no leader
};

struct RawTrack {
  int track_id = 0;
  double vehicle_length = 0.0;  // meters; 0 when the input has no length column
  std::vector<RawFrame> frames;

  double dt() const;  // frame step; requires >= 2 frames
};

// Follower state at one step: gap, speed, relative speed v - v_lead.
struct FollowerState {
  double s = 0.0;
  double v = 0.0;
  double dv = 0.0;
};

struct LeaderSample {
  double v = 0.0;  // m/s
  double a = 0.0;  // m/s^2, finite-difference with a(1) = a(2)
};

enum class WindowSource { real, synthetic };

// Fixed-length exogenous leader profile; the scenario context for simulation.
struct LeaderWindow {
  Eigen::VectorXd v;
  Eigen::VectorXd a;
  WindowSource source = WindowSource::real;
  int origin_id = 0;

  int length() const { return static_cast<int>(v.size()); }
};

struct Segment {
  int follower_id = 0;
  int leader_id = 0;
  double dt = 0.0;
  std::vector<FollowerState> states;
  std::vector<LeaderSample> leader;

  int length() const { return static_cast<int>(states.size()); }
  double duration() const { return dt * static_cast<double>(states.size()); }

  // Follower states as an n x 3 matrix (columns s, v, dv).
  Eigen::MatrixXd follower_matrix() const;
  LeaderWindow leader_window(int offset, int length) const;
};

enum class Split { train, val, test };

const char* split_name(Split s) noexcept;

struct SplitAssignment {
  std::map<int, Split> by_follower;

  Split at(int follower_id) const;
  std::string to_text() const;  // deterministic, sorted by id
  static SplitAssignment from_text(const std::string& text);
};

// ---- data-ingest operations ------------------------------------------------

// Retains every factor-th frame starting from the first; dt scales by factor.
RawTrack downsample(const RawTrack& track, int factor);

// Splits follower tracks into maximal constant-leader segments, discarding
// segments shorter than t_min seconds.  Gap convention: bumper-to-bumper,
// s = x_lead - length_lead - x_follower. Leader acceleration is computed by
// finite differences with a(1) = a(2) at ingest so every consumer shares one
// definition. Segments violating the gap/relative-speed consistency tolerance
// or containing non-positive gaps are dropped (counted in IngestStats).
struct IngestStats {
  int segments_emitted = 0;
  int dropped_short = 0;
  int dropped_gap = 0;
  int dropped_kinematics = 0;
};

std::vector<Segment> extract_segments(const std::vector<RawTrack>& tracks, double t_min,
                                      double eps_kin = 0.5, IngestStats* stats = nullptr);

// A follower window with its aligned leader profile.
struct SegmentWindow {
  int offset = 0;
  Eigen::MatrixXd follower;  // length x 3 (s, v, dv)
  LeaderWindow leader;

  FollowerState initial_state() const {
    return FollowerState{follower(0, 0), follower(0, 1), follower(0, 2)};
  }
};

std::vector<SegmentWindow> extract_windows(const Segment& seg, int length, int stride);

// Deterministic ID-stratified split: seeded shuffle of follower ids, prefix
// cut at the cumulative rounded ratios.
SplitAssignment split_by_follower(const std::vector<Segment>& segments,
                                  const std::array<double, 3>& ratios, std::uint64_t seed);

// ---- file formats -----------------------------------------------------------

// Input CSV: header `frame,id,precedingId,x,xVelocity,length` with optional
// `xAcceleration`; unknown columns ignored. One row per frame. `frame_dt` is
// the raw sampling interval in seconds (0.04 for 25 Hz recordings). Tracks
// whose mean velocity is negative are mirrored (x, v negated) so that speed
// is non-negative and leaders sit at larger x.
std::vector<RawTrack> load_tracks_csv(const std::string& path, double frame_dt);

// Columnar segment file: '#'-prefixed JSON metadata header followed by CSV.
struct SegmentFileMeta {
  double dt = 0.0;
  double t_min = 0.0;
  std::uint64_t seed = 0;
  std::string split;
};

void save_segments(const std::string& path, const std::vector<Segment>& segments,
                   const SegmentFileMeta& meta);
std::vector<Segment> load_segments(const std::string& path, SegmentFileMeta* meta = nullptr);

}  // namespace asbc
