#include "asbc/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "asbc/errors.hpp"
#include "asbc/rng.hpp"

namespace asbc {

namespace {

constexpr double kTimeTol = 1e-6;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) raise(ErrorCode::NumericalError, "double formatting failed");
  return std::string(buf, ptr);
}

double parse_double_field(const std::string& text, int row, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    raise(ErrorCode::FormatError,
          "row " + std::to_string(row) + ": bad " + what + " value '" + text + "'");
  return v;
}

long long parse_int_field(const std::string& text, int row, const char* what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    raise(ErrorCode::FormatError,
          "row " + std::to_string(row) + ": bad " + what + " value '" + text + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

double RawTrack::dt() const {
  if (frames.size() < 2) raise(ErrorCode::InsufficientData, "track needs >= 2 frames for dt");
  return frames[1].t - frames[0].t;
}

Eigen::MatrixXd Segment::follower_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(states.size()), 3);
  for (std::size_t i = 0; i < states.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = states[i].s;
    m(static_cast<Eigen::Index>(i), 1) = states[i].v;
    m(static_cast<Eigen::Index>(i), 2) = states[i].dv;
  }
  return m;
}

LeaderWindow Segment::leader_window(int offset, int len) const {
  if (offset < 0 || len < 1 || offset + len > length())
    raise(ErrorCode::InsufficientLength, "leader window out of range");
  LeaderWindow w;
  w.v.resize(len);
  w.a.resize(len);
  for (int i = 0; i < len; ++i) {
    w.v[i] = leader[static_cast<std::size_t>(offset + i)].v;
    w.a[i] = leader[static_cast<std::size_t>(offset + i)].a;
  }
  w.source = WindowSource::real;
  w.origin_id = follower_id;
  return w;
}

const char* split_name(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split SplitAssignment::at(int follower_id) const {
  auto it = by_follower.find(follower_id);
  if (it == by_follower.end())
    raise(ErrorCode::InsufficientData,
          "follower " + std::to_string(follower_id) + " not in split assignment");
  return it->second;
}

std::string SplitAssignment::to_text() const {
  std::string out = "follower_id,split\n";
  for (const auto& [id, split] : by_follower) {
    out += std::to_string(id);
    out += ",";
    out += split_name(split);
    out += "\n";
  }
  return out;
}

SplitAssignment SplitAssignment::from_text(const std::string& text) {
  SplitAssignment a;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line.rfind("follower_id,split", 0) != 0)
    raise(ErrorCode::FormatError, "bad split-file header");
  int row = 1;
  while (std::getline(ss, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) raise(ErrorCode::FormatError, "bad split row " + std::to_string(row));
    const int id = static_cast<int>(parse_int_field(cells[0], row, "follower_id"));
    Split s;
    if (cells[1] == "train") s = Split::train;
    else if (cells[1] == "val") s = Split::val;
    else if (cells[1] == "test") s = Split::test;
    else raise(ErrorCode::FormatError, "bad split name '" + cells[1] + "'");
    a.by_follower[id] = s;
  }
  return a;
}

RawTrack downsample(const RawTrack& track, int factor) {
  if (track.frames.empty()) raise(ErrorCode::EmptyInput, "downsample of empty track");
  if (factor < 1) raise(ErrorCode::DomainError, "downsample factor must be >= 1");
  if (static_cast<std::size_t>(factor) > track.frames.size())
    raise(ErrorCode::InsufficientData, "downsample factor exceeds frame count");
  RawTrack out;
  out.track_id = track.track_id;
  out.vehicle_length = track.vehicle_length;
  out.frames.reserve(track.frames.size() / static_cast<std::size_t>(factor) + 1);
  for (std::size_t i = 0; i < track.frames.size(); i += static_cast<std::size_t>(factor))
    out.frames.push_back(track.frames[i]);
  return out;
}

namespace {

struct FrameIndexer {
  const RawTrack* track;
  double t0;
  double dt;

  // Index of the frame at time t, or -1 when absent.
  int at(double t) const {
    const double pos = (t - t0) / dt;
    const int idx = static_cast<int>(std::lround(pos));
    if (idx < 0 || idx >= static_cast<int>(track->frames.size())) return -1;
    if (std::abs(track->frames[static_cast<std::size_t>(idx)].t - t) > kTimeTol * 10 + 1e-9 * std::abs(t))
      return -1;
    return idx;
  }
};

}  // namespace

std::vector<Segment> extract_segments(const std::vector<RawTrack>& tracks, double t_min,
                                      double eps_kin, IngestStats* stats) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;

  std::unordered_map<int, FrameIndexer> by_id;
  double common_dt = -1.0;
  for (const auto& tr : tracks) {
    if (tr.frames.size() < 2) continue;
    const double dt = tr.dt();
    if (common_dt < 0.0) common_dt = dt;
    else if (std::abs(dt - common_dt) > kTimeTol)
      raise(ErrorCode::FormatError, "tracks have inconsistent sampling rates");
    by_id[tr.track_id] = FrameIndexer{&tr, tr.frames[0].t, dt};
  }
  if (common_dt < 0.0) return {};

  const int min_len = static_cast<int>(std::ceil(t_min / common_dt - 1e-9));

  std::vector<Segment> segments;
  for (const auto& tr : tracks) {
    if (tr.frames.size() < 2) continue;
    std::size_t i = 0;
    while (i < tr.frames.size()) {
      const int leader_id = tr.frames[i].preceding_id;
      std::size_t j = i;
      while (j < tr.frames.size() && tr.frames[j].preceding_id == leader_id) ++j;
      if (leader_id != 0 && by_id.count(leader_id)) {
        const FrameIndexer& leader = by_id.at(leader_id);
        const RawTrack& lead_track = *leader.track;

        // Build the run; break it wherever the leader frame is missing or the
        // gap is non-positive, keeping maximal valid sub-runs.
        Segment cur;
        cur.follower_id = tr.track_id;
        cur.leader_id = leader_id;
        cur.dt = common_dt;
        auto flush = [&]() {
          if (static_cast<int>(cur.states.size()) >= min_len) {
            // Leader acceleration by finite differences, a(1) = a(2).
            auto& ld = cur.leader;
            for (std::size_t k = 1; k < ld.size(); ++k)
              ld[k].a = (ld[k].v - ld[k - 1].v) / cur.dt;
            if (ld.size() >= 2) ld[0].a = ld[1].a;
            // Gap / relative-speed consistency after downsampling.
            double worst = 0.0;
            for (std::size_t k = 0; k + 1 < cur.states.size(); ++k) {
              const double pred =
                  cur.states[k].s + (ld[k].v - cur.states[k].v) * cur.dt;
              worst = std::max(worst, std::abs(cur.states[k + 1].s - pred));
            }
            if (worst <= eps_kin) {
              segments.push_back(cur);
              ++st.segments_emitted;
            } else {
              ++st.dropped_kinematics;
            }
          } else if (!cur.states.empty()) {
            ++st.dropped_short;
          }
          cur.states.clear();
          cur.leader.clear();
        };

        for (std::size_t k = i; k < j; ++k) {
          const RawFrame& f = tr.frames[k];
          const int li = leader.at(f.t);
          if (li < 0) {
            flush();
            continue;
          }
          const RawFrame& lf = lead_track.frames[static_cast<std::size_t>(li)];
          const double gap = lf.x - lead_track.vehicle_length - f.x;
          if (gap <= 0.0) {
            ++st.dropped_gap;
            flush();
            continue;
          }
          cur.states.push_back(FollowerState{gap, f.v, f.v - lf.v});
          cur.leader.push_back(LeaderSample{lf.v, 0.0});
        }
        flush();
      }
      i = j;
    }
  }
  return segments;
}

std::vector<SegmentWindow> extract_windows(const Segment& seg, int length, int stride) {
  if (length < 1 || stride < 1)
    raise(ErrorCode::DomainError, "window length and stride must be positive");
  if (length > seg.length())
    raise(ErrorCode::InsufficientLength,
          "window length " + std::to_string(length) + " exceeds segment length " +
              std::to_string(seg.length()));
  const Eigen::MatrixXd follower = seg.follower_matrix();
  std::vector<SegmentWindow> windows;
  for (int offset = 0; offset + length <= seg.length(); offset += stride) {
    SegmentWindow w;
    w.offset = offset;
    w.follower = follower.block(offset, 0, length, 3);
    w.leader = seg.leader_window(offset, length);
    windows.push_back(std::move(w));
  }
  return windows;
}

SplitAssignment split_by_follower(const std::vector<Segment>& segments,
                                  const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) raise(ErrorCode::DomainError, "split ratios must sum to 1");

  std::vector<int> ids;
  for (const auto& seg : segments) ids.push_back(seg.follower_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  int nonzero = 0;
  for (double r : ratios)
    if (r > 0.0) ++nonzero;
  if (static_cast<int>(ids.size()) < nonzero)
    raise(ErrorCode::InsufficientData, "fewer follower ids than nonzero splits");

  Rng rng(derive_seed(seed, "split_by_follower"));
  for (std::size_t k = ids.size(); k > 1; --k) {
    const std::size_t j = static_cast<std::size_t>(rng.below(k));
    std::swap(ids[k - 1], ids[j]);
  }

  const auto n = static_cast<double>(ids.size());
  std::array<int, 3> counts{};
  counts[0] = static_cast<int>(std::lround(n * ratios[0]));
  const int cut2 = static_cast<int>(std::lround(n * (ratios[0] + ratios[1])));
  counts[1] = cut2 - counts[0];
  counts[2] = static_cast<int>(ids.size()) - cut2;

  // A nonzero ratio must receive at least one id; borrow from the largest.
  for (int k = 0; k < 3; ++k) {
    if (ratios[static_cast<std::size_t>(k)] > 0.0 && counts[static_cast<std::size_t>(k)] == 0) {
      int donor = 0;
      for (int m = 1; m < 3; ++m)
        if (counts[static_cast<std::size_t>(m)] > counts[static_cast<std::size_t>(donor)]) donor = m;
      --counts[static_cast<std::size_t>(donor)];
      ++counts[static_cast<std::size_t>(k)];
    }
  }

  SplitAssignment assignment;
  std::size_t pos = 0;
  const std::array<Split, 3> order{Split::train, Split::val, Split::test};
  for (int k = 0; k < 3; ++k)
    for (int c = 0; c < counts[static_cast<std::size_t>(k)]; ++c)
      assignment.by_follower[ids[pos++]] = order[static_cast<std::size_t>(k)];
  return assignment;
}

std::vector<RawTrack> load_tracks_csv(const std::string& path, double frame_dt) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::FormatError, "empty CSV " + path);

  const auto header = split_csv_line(line);
  auto col = [&](const char* name) -> int {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<int>(k);
    return -1;
  };
  const int c_frame = col("frame");
  const int c_id = col("id");
  const int c_prec = col("precedingId");
  const int c_x = col("x");
  const int c_v = col("xVelocity");
  const int c_len = col("length");
  if (c_frame < 0 || c_id < 0 || c_prec < 0 || c_x < 0 || c_v < 0)
    raise(ErrorCode::FormatError,
          "missing required column; need frame,id,precedingId,x,xVelocity");

  struct Row {
    long long frame;
    double x, v;
    int preceding;
  };
  std::map<int, std::vector<Row>> rows;
  std::map<int, double> lengths;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) <= std::max({c_frame, c_id, c_prec, c_x, c_v}))
      raise(ErrorCode::FormatError, "row " + std::to_string(row_no) + ": too few columns");
    const int id = static_cast<int>(parse_int_field(cells[static_cast<std::size_t>(c_id)], row_no, "id"));
    Row r;
    r.frame = parse_int_field(cells[static_cast<std::size_t>(c_frame)], row_no, "frame");
    r.x = parse_double_field(cells[static_cast<std::size_t>(c_x)], row_no, "x");
    r.v = parse_double_field(cells[static_cast<std::size_t>(c_v)], row_no, "xVelocity");
    r.preceding = static_cast<int>(
        parse_int_field(cells[static_cast<std::size_t>(c_prec)], row_no, "precedingId"));
    rows[id].push_back(r);
    if (c_len >= 0 && static_cast<int>(cells.size()) > c_len && !cells[static_cast<std::size_t>(c_len)].empty())
      lengths[id] = parse_double_field(cells[static_cast<std::size_t>(c_len)], row_no, "length");
  }

  std::vector<RawTrack> tracks;
  for (auto& [id, rs] : rows) {
    std::sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    for (std::size_t k = 1; k < rs.size(); ++k)
      if (rs[k].frame != rs[k - 1].frame + 1)
        raise(ErrorCode::FormatError,
              "track " + std::to_string(id) + ": non-contiguous frames at " +
                  std::to_string(rs[k].frame));
    RawTrack tr;
    tr.track_id = id;
    tr.vehicle_length = lengths.count(id) ? lengths[id] : 0.0;
    double mean_v = 0.0;
    for (const auto& r : rs) mean_v += r.v;
    mean_v /= static_cast<double>(rs.size());
    const double sign = mean_v < 0.0 ? -1.0 : 1.0;
    for (const auto& r : rs)
      tr.frames.push_back(RawFrame{static_cast<double>(r.frame) * frame_dt, sign * r.x,
                                   sign * r.v, r.preceding});
    tracks.push_back(std::move(tr));
  }
  return tracks;
}

void save_segments(const std::string& path, const std::vector<Segment>& segments,
                   const SegmentFileMeta& meta) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  nlohmann::json j;
  j["dt"] = meta.dt;
  j["t_min"] = meta.t_min;
  j["seed"] = meta.seed;
  j["split"] = meta.split;
  j["count"] = segments.size();
  out << "# asbc-segments v1\n# " << j.dump() << "\n";
  out << "segment_id,follower_id,leader_id,t_index,s,v,dv,v_lead,a_lead\n";
  for (std::size_t sid = 0; sid < segments.size(); ++sid) {
    const Segment& seg = segments[sid];
    for (int t = 0; t < seg.length(); ++t) {
      const auto& fs = seg.states[static_cast<std::size_t>(t)];
      const auto& ls = seg.leader[static_cast<std::size_t>(t)];
      out << sid << ',' << seg.follower_id << ',' << seg.leader_id << ',' << t << ','
          << format_double(fs.s) << ',' << format_double(fs.v) << ',' << format_double(fs.dv)
          << ',' << format_double(ls.v) << ',' << format_double(ls.a) << '\n';
    }
  }
}

std::vector<Segment> load_segments(const std::string& path, SegmentFileMeta* meta) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "# asbc-segments v1")
    raise(ErrorCode::FormatError, "bad segment-file magic in " + path);
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    raise(ErrorCode::FormatError, "missing segment-file metadata in " + path);
  const auto j = nlohmann::json::parse(line.substr(2));
  if (meta) {
    meta->dt = j.at("dt").get<double>();
    meta->t_min = j.at("t_min").get<double>();
    meta->seed = j.at("seed").get<std::uint64_t>();
    meta->split = j.at("split").get<std::string>();
  }
  const double dt = j.at("dt").get<double>();
  if (!std::getline(in, line) || line.rfind("segment_id,", 0) != 0)
    raise(ErrorCode::FormatError, "missing segment-file column header in " + path);

  std::vector<Segment> segments;
  long long cur_sid = -1;
  int row_no = 3;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 9)
      raise(ErrorCode::FormatError, "row " + std::to_string(row_no) + ": expected 9 columns");
    const long long sid = parse_int_field(cells[0], row_no, "segment_id");
    if (sid != cur_sid) {
      if (sid != cur_sid + 1)
        raise(ErrorCode::FormatError, "segment ids must be consecutive");
      cur_sid = sid;
      Segment seg;
      seg.follower_id = static_cast<int>(parse_int_field(cells[1], row_no, "follower_id"));
      seg.leader_id = static_cast<int>(parse_int_field(cells[2], row_no, "leader_id"));
      seg.dt = dt;
      segments.push_back(seg);
    }
    Segment& seg = segments.back();
    seg.states.push_back(FollowerState{parse_double_field(cells[4], row_no, "s"),
                                       parse_double_field(cells[5], row_no, "v"),
                                       parse_double_field(cells[6], row_no, "dv")});
    seg.leader.push_back(LeaderSample{parse_double_field(cells[7], row_no, "v_lead"),
                                      parse_double_field(cells[8], row_no, "a_lead")});
  }
  return segments;
}

}  // namespace asbc
