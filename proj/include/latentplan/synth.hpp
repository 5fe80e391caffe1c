#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dataset.hpp"
#include "latentplan/error.hpp"

namespace latentplan {

enum class OracleKind { Circle, Lissajous, TwoGait };

struct GeneratorSpec {
  OracleKind kind = OracleKind::Circle;
  int dim = 12;                 // observation channels D
  double noise_std = 0.01;      // per channel
  int frames_per_cycle = 20;
  int cycles = 3;               // per sequence (for two-gait: per gait)
  int sequences = 1;
  double turn_amplitude = 0.0;  // peak yaw rate (rad/s) reached by the turn level
  double base_speed = 1.2;      // forward velocity (m/s) of the slow gait
  double frame_rate = 10.0;     // Hz
  std::uint64_t seed = 0;
};

struct SyntheticData {
  MotionDataset dataset;
  Eigen::MatrixXd latent;            // ground-truth oracle path, one row per frame
  std::vector<int> gait;             // 0 slow, 1 fast (two-gait only; zeros otherwise)
  Eigen::VectorXd turn_level;        // turn level driving the yaw-rate channel
};

namespace detail {

// Fixed random smooth lift: sum of three sinusoidal features of the oracle coordinates.
struct Lift {
  Eigen::MatrixXd freq[3];  // channels x inputs
  Eigen::MatrixXd amp;      // channels x 3
  Eigen::MatrixXd phase;    // channels x 3
  Eigen::VectorXd gait_offset;

  Lift(int channels, int inputs, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& f : freq) {
      f.resize(channels, inputs);
      for (Index i = 0; i < f.size(); ++i) f(i) = 0.8 * normal(rng);
    }
    amp.resize(channels, 3);
    phase.resize(channels, 3);
    gait_offset.resize(channels);
    for (int c = 0; c < channels; ++c) {
      for (int f = 0; f < 3; ++f) {
        amp(c, f) = normal(rng);
        phase(c, f) = uniform(rng);
      }
      gait_offset(c) = (c % 2 == 0 ? 1.0 : -1.0) * (0.7 + 0.3 * std::abs(normal(rng)));
    }
  }

  double eval(int c, const Eigen::VectorXd& z) const {
    double v = 0.0;
    for (int f = 0; f < 3; ++f) v += amp(c, f) * std::sin(freq[f].row(c).dot(z) + phase(c, f));
    return v;
  }
};

}  // namespace detail

// Limit-cycle oracle lifted to D channels: vel_forward, vel_lateral, yaw_rate, joint_0..
inline SyntheticData generate(const GeneratorSpec& spec) {
  if (spec.dim < 4) throw Error(ErrorKind::InvalidInput, "synthetic data needs D >= 4");
  if (spec.frames_per_cycle < 2 || spec.cycles < 1 || spec.sequences < 1)
    throw Error(ErrorKind::InvalidInput, "need >= 2 frames per cycle, >= 1 cycle and >= 1 sequence");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  const int joints = spec.dim - 3;
  const detail::Lift lift(joints, 4, rng);

  std::vector<double> phases;
  std::vector<double> gait_level;
  std::vector<double> turn;
  std::vector<Eigen::Index> starts;
  const double ou_rate = 0.02;
  const double ou_sigma = 0.1;
  for (int s = 0; s < spec.sequences; ++s) {
    starts.push_back(static_cast<Eigen::Index>(phases.size()));
    const int offset = static_cast<int>(std::uniform_int_distribution<int>(0, spec.frames_per_cycle - 1)(rng));
    double tau = spec.turn_amplitude > 0.0 ? std::uniform_real_distribution<double>(-1.0, 1.0)(rng) : 0.0;
    auto push = [&](double phi, double g) {
      phases.push_back(phi);
      gait_level.push_back(g);
      turn.push_back(tau);
      if (spec.turn_amplitude > 0.0) tau = std::clamp(tau - ou_rate * tau + ou_sigma * normal(rng), -1.5, 1.5);
    };
    if (spec.kind != OracleKind::TwoGait) {
      const int frames = spec.frames_per_cycle * spec.cycles;
      for (int t = 0; t < frames; ++t)
        push(two_pi * static_cast<double>((t + offset) % spec.frames_per_cycle) / spec.frames_per_cycle, 0.0);
    } else {
      // Slow cycles, one transition cycle with a smooth ramp, then fast cycles at 0.6x period.
      const double fast_frames = std::max(2.0, std::round(0.6 * spec.frames_per_cycle));
      double phi = two_pi * offset / spec.frames_per_cycle;
      const int slow = spec.frames_per_cycle * spec.cycles;
      for (int t = 0; t < slow; ++t) {
        push(std::fmod(phi, two_pi), 0.0);
        phi += two_pi / spec.frames_per_cycle;
      }
      const int ramp = spec.frames_per_cycle;
      for (int t = 0; t < ramp; ++t) {
        const double a = (t + 0.5) / ramp;
        const double g = a * a * (3.0 - 2.0 * a);
        push(std::fmod(phi, two_pi), g);
        phi += two_pi / ((1.0 - g) * spec.frames_per_cycle + g * fast_frames);
      }
      const int fast = static_cast<int>(fast_frames) * spec.cycles;
      for (int t = 0; t < fast; ++t) {
        push(std::fmod(phi, two_pi), 1.0);
        phi += two_pi / fast_frames;
      }
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(phases.size());
  SyntheticData out;
  MotionDataset& data = out.dataset;
  data.frame_rate = spec.frame_rate;
  data.sequence_starts = starts;
  data.observations.resize(n, spec.dim);
  data.phase = Eigen::VectorXd(n);
  const int latent_cols = spec.kind == OracleKind::TwoGait ? 3 : 2;
  out.latent.resize(n, latent_cols + (spec.turn_amplitude > 0.0 ? 1 : 0));
  out.gait.assign(static_cast<size_t>(n), 0);
  out.turn_level.resize(n);
  data.channel_names = {kForwardVelocityName, kLateralVelocityName, kYawRateName};
  for (int j = 0; j < joints; ++j) data.channel_names.push_back("joint_" + std::to_string(j));

  Eigen::MatrixXd joint_values(n, joints);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double phi = phases[static_cast<size_t>(t)];
    const double g = gait_level[static_cast<size_t>(t)];
    const double tau = turn[static_cast<size_t>(t)];
    (*data.phase)(t) = phi;
    Eigen::VectorXd z(4);
    if (spec.kind == OracleKind::Lissajous) z << std::sin(phi), std::sin(2.0 * phi + 0.5), tau, g;
    else z << std::cos(phi), std::sin(phi), tau, g;
    out.latent.row(t).head(2) = z.head(2).transpose();
    if (spec.kind == OracleKind::TwoGait) out.latent(t, 2) = g;
    if (spec.turn_amplitude > 0.0) out.latent(t, out.latent.cols() - 1) = tau;
    out.gait[static_cast<size_t>(t)] = g >= 0.5 ? 1 : 0;
    out.turn_level(t) = tau;
    for (int j = 0; j < joints; ++j) joint_values(t, j) = lift.eval(j, z) * (1.0 + 0.5 * g);
    data.observations(t, 0) = spec.base_speed * (1.0 + 0.8 * g) * (1.0 + 0.05 * std::cos(2.0 * phi));
    data.observations(t, 1) = 0.0;
    data.observations(t, 2) = spec.turn_amplitude * tau;
  }
  // Normalize each joint channel to peak |value| 0.35 rad before adding the gait offset.
  for (int j = 0; j < joints; ++j) {
    const double peak = joint_values.col(j).cwiseAbs().maxCoeff();
    if (peak > 0.0) joint_values.col(j) *= 0.35 / peak;
  }
  for (Eigen::Index t = 0; t < n; ++t)
    for (int j = 0; j < joints; ++j)
      data.observations(t, 3 + j) = joint_values(t, j) + 0.8 * lift.gait_offset(j) * gait_level[static_cast<size_t>(t)];
  if (spec.noise_std > 0.0)
    for (Eigen::Index i = 0; i < data.observations.size(); ++i) data.observations(i) += spec.noise_std * normal(rng);
  data.validate();
  return out;
}

}  // namespace latentplan
