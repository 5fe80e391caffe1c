#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/error.hpp"

namespace latentplan {

// Observation channels holding (forward velocity m/s, lateral velocity m/s, yaw rate rad/s).
struct VelocityChannels {
  int forward = -1;
  int lateral = -1;
  int yaw = -1;

  bool valid(Eigen::Index dim) const {
    return forward >= 0 && lateral >= 0 && yaw >= 0 && forward < dim && lateral < dim && yaw < dim &&
           forward != lateral && forward != yaw && lateral != yaw;
  }
  friend bool operator==(const VelocityChannels&, const VelocityChannels&) = default;
};

inline constexpr const char* kForwardVelocityName = "vel_forward";
inline constexpr const char* kLateralVelocityName = "vel_lateral";
inline constexpr const char* kYawRateName = "yaw_rate";

struct MotionDataset {
  Eigen::MatrixXd observations;            // N x D, one frame per row
  std::vector<Eigen::Index> sequence_starts{0};
  std::optional<Eigen::VectorXd> phase;    // radians
  double frame_rate = 30.0;                // Hz
  std::vector<std::string> channel_names;  // D entries, may be empty

  Eigen::Index frames() const { return observations.rows(); }
  Eigen::Index channels() const { return observations.cols(); }
  Eigen::Index sequence_count() const { return static_cast<Eigen::Index>(sequence_starts.size()); }

  Eigen::Index sequence_end(Eigen::Index s) const {
    return s + 1 < sequence_count() ? sequence_starts[static_cast<size_t>(s + 1)] : frames();
  }

  // Throws InvalidInput describing the first violated invariant.
  void validate() const {
    const Eigen::Index n = frames();
    if (n < 2) throw Error(ErrorKind::InvalidInput, "dataset needs at least two frames");
    if (sequence_starts.empty() || sequence_starts.front() != 0)
      throw Error(ErrorKind::InvalidInput, "sequence_starts must begin at 0");
    for (size_t s = 0; s < sequence_starts.size(); ++s) {
      if (sequence_starts[s] >= n) throw Error(ErrorKind::InvalidInput, "sequence start out of range");
      if (s > 0 && sequence_starts[s] <= sequence_starts[s - 1])
        throw Error(ErrorKind::InvalidInput, "sequence_starts must be strictly increasing");
      if (sequence_end(static_cast<Eigen::Index>(s)) - sequence_starts[s] < 2)
        throw Error(ErrorKind::InvalidInput, "every sequence needs at least two frames");
    }
    if (phase && phase->size() != n) throw Error(ErrorKind::InvalidInput, "phase length differs from frame count");
    if (!channel_names.empty() && static_cast<Eigen::Index>(channel_names.size()) != channels())
      throw Error(ErrorKind::InvalidInput, "channel name count differs from observation width");
    if (!observations.allFinite()) throw Error(ErrorKind::InvalidInput, "observations contain non-finite values");
    if (frame_rate <= 0.0) throw Error(ErrorKind::InvalidInput, "frame rate must be positive");
  }

  std::optional<VelocityChannels> velocity_channels() const {
    VelocityChannels v;
    for (size_t c = 0; c < channel_names.size(); ++c) {
      if (channel_names[c] == kForwardVelocityName) v.forward = static_cast<int>(c);
      if (channel_names[c] == kLateralVelocityName) v.lateral = static_cast<int>(c);
      if (channel_names[c] == kYawRateName) v.yaw = static_cast<int>(c);
    }
    if (v.valid(channels())) return v;
    return std::nullopt;
  }
};

namespace csv {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    if (s == "inf" || s == "+inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  }
  return v;
}

// Shortest round-trippable representation.
inline std::string format(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace csv

// Format: optional "# frame_rate: <Hz>" comment, header row with `seq`, optional `phase`,
// then one column per channel.
inline MotionDataset read_dataset_csv(std::istream& in) {
  MotionDataset data;
  std::string line;
  size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      const auto pos = line.find("frame_rate:");
      if (pos != std::string::npos) data.frame_rate = csv::parse_double(csv::split(line.substr(pos + 11)).at(0), line_no);
      continue;
    }
    header = csv::split(line);
    break;
  }
  if (header.empty()) throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": missing header row");
  int seq_col = -1;
  int phase_col = -1;
  std::vector<int> channel_cols;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "seq") seq_col = static_cast<int>(c);
    else if (header[c] == "phase") phase_col = static_cast<int>(c);
    else {
      channel_cols.push_back(static_cast<int>(c));
      data.channel_names.push_back(header[c]);
    }
  }
  if (seq_col < 0) throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": header lacks 'seq' column");
  if (channel_cols.empty()) throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": no data channels");

  std::vector<std::vector<double>> rows;
  std::vector<double> phases;
  std::vector<Eigen::Index> starts;
  std::string last_seq;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = csv::split(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(header.size()) + " fields, got " +
                                               std::to_string(cells.size()));
    const std::string& seq = cells[static_cast<size_t>(seq_col)];
    if (rows.empty() || seq != last_seq) starts.push_back(static_cast<Eigen::Index>(rows.size()));
    last_seq = seq;
    std::vector<double> row;
    row.reserve(channel_cols.size());
    for (int c : channel_cols) row.push_back(csv::parse_double(cells[static_cast<size_t>(c)], line_no));
    if (phase_col >= 0) phases.push_back(csv::parse_double(cells[static_cast<size_t>(phase_col)], line_no));
    rows.push_back(std::move(row));
  }
  data.observations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(channel_cols.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      data.observations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  data.sequence_starts = starts.empty() ? std::vector<Eigen::Index>{0} : starts;
  if (phase_col >= 0) data.phase = Eigen::Map<Eigen::VectorXd>(phases.data(), static_cast<Eigen::Index>(phases.size()));
  data.validate();
  return data;
}

inline MotionDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
  return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const MotionDataset& data) {
  out << "# frame_rate: " << csv::format(data.frame_rate) << "\n";
  out << "seq";
  if (data.phase) out << ",phase";
  for (Eigen::Index c = 0; c < data.channels(); ++c) {
    out << ",";
    if (data.channel_names.empty()) out << "ch" << c;
    else out << data.channel_names[static_cast<size_t>(c)];
  }
  out << "\n";
  for (Eigen::Index s = 0; s < data.sequence_count(); ++s) {
    for (Eigen::Index r = data.sequence_starts[static_cast<size_t>(s)]; r < data.sequence_end(s); ++r) {
      out << s;
      if (data.phase) out << "," << csv::format((*data.phase)(r));
      for (Eigen::Index c = 0; c < data.channels(); ++c) out << "," << csv::format(data.observations(r, c));
      out << "\n";
    }
  }
}

}  // namespace latentplan
