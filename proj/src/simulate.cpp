#include <algorithm>
#include <cmath>

#include "bmjb/process.hpp"

namespace bmjb {

namespace {
constexpr std::size_t kMaxCachedAtoms = 256;
}

Simulator::Simulator(JumpMeasure nu) : nu_(std::move(nu)) {
  if (nu_.is_discrete() && nu_.quadrature().size() <= kMaxCachedAtoms) {
    for (const Atom& atom : nu_.quadrature()) {
      cache_.emplace_back(nu_.interval(), atom.point);
      cache_.back().build_table();
    }
  }
}

const ExitLaw* Simulator::cached(double x) const {
  auto it = std::lower_bound(cache_.begin(), cache_.end(), x,
                             [](const ExitLaw& law, double v) { return law.start() < v; });
  if (it != cache_.end() && it->start() == x) return &*it;
  return nullptr;
}

double Simulator::sample_start(const StartLaw& start, RandomStream& rng) const {
  if (const double* x = std::get_if<double>(&start)) {
    if (!interval().contains(*x)) throw DomainError("start point outside the open interval");
    return *x;
  }
  return std::get<JumpMeasure>(start).sample(rng);
}

Exit Simulator::sample_exit(double x, RandomStream& rng) const {
  if (const ExitLaw* law = cached(x)) return law->sample(rng);
  return ExitLaw(interval(), x).sample(rng);
}

Simulator::State Simulator::run(double x, double duration, RandomStream& rng) const {
  int jumps = 0;
  double remaining = duration;
  for (;;) {
    const Exit exit = sample_exit(x, rng);
    if (exit.time > remaining) break;
    remaining -= exit.time;
    x = nu_.sample(rng);
    ++jumps;
  }
  if (remaining > 0.0) x = sample_killed_position(interval(), x, remaining, rng);
  return {x, jumps};
}

PathSkeleton Simulator::path(const StartLaw& start, double horizon, RandomStream& rng) const {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  PathSkeleton path;
  path.horizon = horizon;
  double x = path.start = sample_start(start, rng);
  double clock = 0.0;
  for (;;) {
    const Exit exit = sample_exit(x, rng);
    if (clock + exit.time > horizon) break;
    clock += exit.time;
    path.excursions.push_back(exit.time);
    path.epochs.push_back(clock);
    x = nu_.sample(rng);
    path.targets.push_back(x);
  }
  path.position = sample_killed_position(interval(), x, horizon - clock, rng);
  return path;
}

std::vector<double> Simulator::positions(const StartLaw& start, const std::vector<double>& times,
                                         RandomStream& rng) const {
  std::vector<double> out;
  out.reserve(times.size());
  double x = sample_start(start, rng);
  double previous = 0.0;
  for (double t : times) {
    if (!(t > previous)) throw DomainError("positions: times must be positive and increasing");
    x = run(x, t - previous, rng).position;
    out.push_back(x);
    previous = t;
  }
  return out;
}

std::pair<double, double> Simulator::mirror_pair(double x, double t, RandomStream& rng) const {
  const Exit exit = sample_exit(x, rng);
  if (exit.time > t) {
    const double position = sample_killed_position(interval(), x, t, rng);
    return {position, reflect(position, interval())};
  }
  const double position = run(nu_.sample(rng), t - exit.time, rng).position;
  return {position, position};
}

PathSkeleton simulate(const StartLaw& start, const JumpMeasure& nu, double horizon,
                      RandomStream& rng) {
  return Simulator(nu).path(start, horizon, rng);
}

}  // namespace bmjb
