#pragma once

#include <vector>

#include "morph/nn.hpp"

MORPH_BEGIN_NAMESPACE

/// Sample times of one generated sequence. Single-axis schedules keep
/// content == style; content/style schedules sample each axis independently.
struct TimeSchedule {
  std::vector<Real> content;
  std::vector<Real> style;
  bool dual = false;

  std::size_t size() const { return content.size(); }
  // Times that drive warping, transition pacing and the first time channel.
  const std::vector<Real>& t() const { return content; }
};

// Evenly spaced (i-1)/(k-1), k >= 2.
TimeSchedule uniform_schedule(int k);
// Interior points i.i.d. uniform on (0,1), sorted per axis; endpoints pinned.
TimeSchedule cs_schedule(int k, Rng& rng);
// Dual-axis schedule from explicit per-axis times.
TimeSchedule dual_schedule(std::vector<Real> content, std::vector<Real> style);

// Throws std::invalid_argument if the schedule breaks its invariants.
void validate(const TimeSchedule& s);

MORPH_END_NAMESPACE
