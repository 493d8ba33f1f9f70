#include "morph/schedule.hpp"

#include <algorithm>
#include <stdexcept>

MORPH_BEGIN_NAMESPACE

TimeSchedule uniform_schedule(int k) {
  if (k < 2) throw std::invalid_argument("a schedule needs k >= 2 samples");
  TimeSchedule s;
  s.content.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) s.content[static_cast<std::size_t>(i)] = static_cast<Real>(double(i) / double(k - 1));
  s.content.back() = Real(1);
  s.style = s.content;
  return s;
}

TimeSchedule cs_schedule(int k, Rng& rng) {
  if (k < 2) throw std::invalid_argument("a schedule needs k >= 2 samples");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto axis = [&] {
    std::vector<Real> v{Real(0)};
    for (int i = 0; i < k - 2; ++i) v.push_back(static_cast<Real>(u(rng)));
    std::sort(v.begin() + 1, v.end());
    v.push_back(Real(1));
    return v;
  };
  TimeSchedule s;
  s.content = axis();
  s.style = axis();
  s.dual = true;
  return s;
}

TimeSchedule dual_schedule(std::vector<Real> content, std::vector<Real> style) {
  TimeSchedule s{std::move(content), std::move(style), true};
  if (s.content.size() != s.style.size())
    throw std::invalid_argument("content and style axes need the same number of samples");
  return s;
}

void validate(const TimeSchedule& s) {
  if (s.content.size() < 2 || s.style.size() != s.content.size())
    throw std::invalid_argument("schedule needs k >= 2 samples on each axis");
  for (const auto* axis : {&s.content, &s.style})
    for (Real v : *axis)
      if (!(v >= 0 && v <= 1)) throw std::invalid_argument("schedule times must lie in [0,1]");
  if (!s.dual) {
    if (s.content.front() != 0 || s.content.back() != 1)
      throw std::invalid_argument("single-axis schedule endpoints must be exactly 0 and 1");
    for (std::size_t i = 1; i < s.content.size(); ++i)
      if (s.content[i] < s.content[i - 1]) throw std::invalid_argument("schedule must be ascending");
  }
}

MORPH_END_NAMESPACE
