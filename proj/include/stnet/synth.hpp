#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "stnet/dataset.hpp"
#include "stnet/error.hpp"
#include "stnet/graph.hpp"
#include "stnet/rng.hpp"
#include "stnet/timeutil.hpp"

namespace stnet {

enum class Topology { Ring, Grid, Random };

inline std::string to_string(Topology t) {
  switch (t) {
    case Topology::Ring: return "ring";
    case Topology::Grid: return "grid";
    case Topology::Random: return "random";
  }
  return "?";
}

inline Topology parse_topology(const std::string &s) {
  if (s == "ring") return Topology::Ring;
  if (s == "grid") return Topology::Grid;
  if (s == "random") return Topology::Random;
  throw ValidationError("unknown topology '" + s + "' (expected ring, grid or random)");
}

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t nodes = 10;
  std::size_t slots = 2016;
  Topology topology = Topology::Ring;
  int interval_minutes = 5;
  Timestamp start = 1514764800;  // 2018-01-01T00:00, a Monday

  static constexpr std::size_t kMinNodes = 2;
  static constexpr std::size_t kMinSlots = 64;

  void validate() const {
    if (nodes < kMinNodes) throw ValidationError("synth needs at least 2 nodes, got " + std::to_string(nodes));
    if (slots < kMinSlots) throw ValidationError("synth needs at least 64 slots, got " + std::to_string(slots));
    if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
      throw ValidationError("interval_minutes must divide a day");
    }
  }
};

struct ChannelCorrelation {
  double flow_speed = 0.0;
  double flow_occupancy = 0.0;
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw DimensionError("pearson: series lengths differ or are empty");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Correlation of flow with speed and occupancy, pooled over all slots and nodes.
inline ChannelCorrelation channel_correlation(const SignalDataset &ds) {
  const auto find = [&](const std::string &name) -> std::size_t {
    const auto it = std::find(ds.channel_names.begin(), ds.channel_names.end(), name);
    if (it == ds.channel_names.end()) throw ValidationError("dataset has no '" + name + "' channel");
    return static_cast<std::size_t>(it - ds.channel_names.begin());
  };
  const std::size_t f = find("flow"), s = find("speed"), o = find("occupancy");
  const std::size_t m = ds.slots() * ds.nodes();
  std::vector<double> flow(m), speed(m), occ(m);
  for (std::size_t t = 0; t < ds.slots(); ++t)
    for (std::size_t n = 0; n < ds.nodes(); ++n) {
      const std::size_t i = t * ds.nodes() + n;
      flow[i] = ds.at(t, n, f);
      speed[i] = ds.at(t, n, s);
      occ[i] = ds.at(t, n, o);
    }
  return {pearson(flow, speed), pearson(flow, occ)};
}

namespace detail {

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline GraphSpec synth_topology(Topology topo, std::size_t n, Rng &rng) {
  GraphSpec g;
  g.node_count = n;
  std::set<std::pair<std::size_t, std::size_t>> have;
  const auto link = [&](std::size_t a, std::size_t b) {
    const auto key = std::pair{std::min(a, b), std::max(a, b)};
    if (a == b || have.count(key)) return;
    have.insert(key);
    g.edges.push_back({a, b, round2(rng.uniform(0.5, 2.5))});
  };
  switch (topo) {
    case Topology::Ring:
      for (std::size_t i = 0; i < n; ++i) link(i, (i + 1) % n);
      break;
    case Topology::Grid: {
      const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      for (std::size_t i = 0; i < n; ++i) {
        if ((i % cols) + 1 < cols && i + 1 < n) link(i, i + 1);
        if (i + cols < n) link(i, i + cols);
      }
      break;
    }
    case Topology::Random:
      for (std::size_t i = 1; i < n; ++i) link(i, rng.index(i));
      for (std::size_t k = 0; k < n / 2; ++k) link(rng.index(n), rng.index(n));
      break;
  }
  return g;
}

inline std::vector<std::size_t> hop_distances(const GraphSpec &g, std::size_t source) {
  std::vector<std::vector<std::size_t>> adj(g.node_count);
  for (const Edge &e : g.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<std::size_t> hops(g.node_count, g.node_count);
  std::queue<std::size_t> q;
  hops[source] = 0;
  q.push(source);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t v : adj[u])
      if (hops[v] == g.node_count) {
        hops[v] = hops[u] + 1;
        q.push(v);
      }
  }
  return hops;
}

inline bool fixed_holiday(Timestamp ts) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(sys_seconds{seconds{ts}})};
  const unsigned m = static_cast<unsigned>(ymd.month()), d = static_cast<unsigned>(ymd.day());
  return (m == 1 && d == 1) || (m == 7 && d == 4) || (m == 12 && d == 25);
}

}  // namespace detail

/// Seeded synthetic traffic with PeMS-like channel structure.
///
/// Flow follows a daily cycle whose phase shifts by ~10 minutes per hop from
/// node 0, scaled down on weekends/holidays and in bad weather, modulated by a
/// slowly varying spatially coupled disturbance. Speed falls and occupancy
/// rises linearly with flow.
inline DatasetBundle synth_generate(const SynthConfig &cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.nodes, t_len = cfg.slots;

  DatasetBundle bundle;
  bundle.graph = detail::synth_topology(cfg.topology, n, rng);
  const auto hops = detail::hop_distances(bundle.graph, 0);

  std::vector<std::vector<std::size_t>> neighbours(n);
  for (const Edge &e : bundle.graph.edges) {
    neighbours[e.src].push_back(e.dst);
    neighbours[e.dst].push_back(e.src);
  }

  std::vector<double> base(n), phase(n);
  for (std::size_t v = 0; v < n; ++v) {
    base[v] = rng.uniform(150.0, 350.0);
    phase[v] = 10.0 * static_cast<double>(hops[v]) + rng.uniform(-2.0, 2.0);
  }

  SignalDataset &ds = bundle.data;
  ds.interval_minutes = cfg.interval_minutes;
  ds.external_schema = ExternalSchema::standard();
  for (std::size_t v = 0; v < n; ++v) ds.node_ids.push_back("S" + std::to_string(v));
  ds.signals = Tensor({t_len, n, 3});
  ds.externals = Tensor::zeros(t_len, ds.external_schema.width());

  constexpr double kWeatherFactor[4] = {1.0, 0.85, 0.7, 0.95};
  constexpr double kRho = 0.97, kCoupling = 0.1, kShock = 0.015;
  const double two_pi = 2.0 * std::numbers::pi;
  const std::size_t slots_per_hour = std::max<std::size_t>(1, static_cast<std::size_t>(60 / cfg.interval_minutes));
  std::size_t weather = 0;
  std::vector<double> z(n, 0.0), z_next(n);

  for (std::size_t t = 0; t < t_len; ++t) {
    const Timestamp ts = cfg.start + static_cast<Timestamp>(t) * cfg.interval_minutes * 60;
    ds.timestamps.push_back(ts);

    if (t > 0 && t % slots_per_hour == 0 && rng.uniform() < 0.12) weather = rng.index(4);
    const bool holiday = detail::fixed_holiday(ts);
    const bool weekend = weekday_index(ts) >= 5;
    const std::size_t day_type = holiday ? 2 : (weekend ? 1 : 0);
    const double day_factor = day_type == 0 ? 1.0 : 0.6;
    const double minute = static_cast<double>(minute_of_day(ts));

    const double temp = 12.0 + 7.0 * std::sin(two_pi * (minute - 540.0) / 1440.0) - 3.0 * (weather == 2) +
                        rng.normal(0.0, 0.3);
    ds.externals(t, day_type) = 1.0;
    ds.externals(t, 3 + weather) = 1.0;
    ds.externals(t, 7) = detail::round2(temp);

    for (std::size_t v = 0; v < n; ++v) {
      double pull = 0.0;
      for (std::size_t u : neighbours[v]) pull += z[u] - z[v];
      if (!neighbours[v].empty()) pull /= static_cast<double>(neighbours[v].size());
      z_next[v] = kRho * z[v] + kCoupling * pull + rng.normal(0.0, kShock);
    }
    z.swap(z_next);

    for (std::size_t v = 0; v < n; ++v) {
      const double theta = two_pi * (minute - phase[v]) / 1440.0;
      const double profile = 0.55 - 0.4 * std::cos(theta) - 0.1 * std::cos(2.0 * theta);
      double flow = base[v] * profile * day_factor * kWeatherFactor[weather] * std::exp(z[v]);
      flow = std::max(0.0, flow + rng.normal(0.0, 0.01 * base[v]));
      const double speed = 70.0 - 0.06 * flow + rng.normal(0.0, 1.5);
      const double occ = std::clamp(0.0008 * flow + rng.normal(0.0, 0.01), 0.0, 1.0);
      const std::size_t i = (t * n + v) * 3;
      ds.signals[i] = flow;
      ds.signals[i + 1] = speed;
      ds.signals[i + 2] = occ;
    }
  }
  // Store exactly what signals.bin can hold, so save/load is an identity.
  for (double &v : ds.signals.data()) v = static_cast<double>(static_cast<float>(v));
  ds.validate();
  return bundle;
}

}  // namespace stnet
