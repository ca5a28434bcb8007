#include "nvsim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nvsim {

TimeTrace TimeTrace::uniform(double t0, double dt, std::vector<double> values) {
  if (!(dt > 0)) throw std::invalid_argument("trace dt must be > 0");
  if (values.size() < 2) throw std::invalid_argument("trace needs at least 2 samples");
  TimeTrace tr;
  tr.times.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k)
    tr.times[k] = t0 + static_cast<double>(k) * dt;
  tr.values = std::move(values);
  return tr;
}

TimeTrace TimeTrace::sampled(std::vector<double> times, std::vector<double> values) {
  if (times.size() != values.size())
    throw std::invalid_argument("times/values size mismatch");
  if (values.size() < 2) throw std::invalid_argument("trace needs at least 2 samples");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw std::invalid_argument("trace times must be strictly increasing");
  TimeTrace tr;
  tr.times = std::move(times);
  tr.values = std::move(values);
  return tr;
}

bool TimeTrace::is_uniform(double rel_tol) const {
  if (times.size() < 2) return false;
  const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - times[k - 1] - step) > rel_tol * std::max(step, 1e-300))
      return false;
  }
  return true;
}

double TimeTrace::dt() const {
  if (!is_uniform()) throw std::logic_error("trace is not uniformly sampled");
  return (times.back() - times.front()) / static_cast<double>(times.size() - 1);
}

std::size_t PowerSpectrum::peak_bin() const {
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace nvsim
