#include <gtest/gtest.h>

#include <fstream>

#include "stnet/synth.hpp"
#include "test_util.hpp"

using namespace stnet;
using stnet::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

SynthConfig ring(std::uint64_t seed = 7, std::size_t n = 10, std::size_t t = 2016) {
  SynthConfig c;
  c.seed = seed;
  c.nodes = n;
  c.slots = t;
  c.topology = Topology::Ring;
  return c;
}

}  // namespace

TEST(Pearson, HandCases) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 4, 6, 8};
  const std::vector<double> z{4, 3, 2, 1};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-15);
  // deviations (-1,0,1) and (-1,1,0): r = 1 / sqrt(2 * 2)
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-15);
}

TEST(Synth, SameSeedSameBytes) {
  TempDir a, b;
  save_dataset(synth_generate(ring()), a.path());
  save_dataset(synth_generate(ring()), b.path());
  for (const char *f : {"meta.json", "signals.bin", "edges.csv", "externals.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

  TempDir c;
  save_dataset(synth_generate(ring(8)), c.path());
  EXPECT_NE(slurp(a / "signals.bin"), slurp(c / "signals.bin"));
}

TEST(Synth, ChannelCorrelations) {
  for (Topology topo : {Topology::Ring, Topology::Grid, Topology::Random}) {
    for (std::uint64_t seed : {1u, 7u, 42u}) {
      SynthConfig cfg = ring(seed, 9, 1000);
      cfg.topology = topo;
      const ChannelCorrelation r = channel_correlation(synth_generate(cfg).data);
      EXPECT_LT(r.flow_speed, -0.5) << to_string(topo) << " seed " << seed;
      EXPECT_GT(r.flow_occupancy, 0.5) << to_string(topo) << " seed " << seed;
    }
  }
}

TEST(Synth, GeneratedDirectoryLoads) {
  TempDir dir;
  const DatasetBundle b = synth_generate(ring());
  save_dataset(b, dir.path());
  const DatasetBundle r = load_dataset(dir.path());
  EXPECT_EQ(r.data.slots(), 2016u);
  EXPECT_EQ(r.data.nodes(), 10u);
  EXPECT_EQ(r.data.signals, b.data.signals);
  EXPECT_EQ(r.data.externals, b.data.externals);
  EXPECT_EQ(r.graph.edges.size(), 10u);
  EXPECT_FALSE(r.graph.directed);
}

TEST(Synth, PreconditionsAndTopologies) {
  EXPECT_THROW(synth_generate(ring(7, 1, 100)), ValidationError);
  EXPECT_THROW(synth_generate(ring(7, 4, 63)), ValidationError);
  EXPECT_NO_THROW(synth_generate(ring(7, 2, 64)));
  EXPECT_THROW(parse_topology("star"), ValidationError);

  SynthConfig grid = ring(3, 9, 64);
  grid.topology = Topology::Grid;
  EXPECT_EQ(synth_generate(grid).graph.edges.size(), 12u);  // 3x3 lattice

  SynthConfig rnd = ring(3, 12, 64);
  rnd.topology = Topology::Random;
  const GraphSpec g = synth_generate(rnd).graph;
  const auto hops = detail::hop_distances(g, 0);
  for (std::size_t h : hops) EXPECT_LT(h, 12u);  // spanning tree keeps it connected
}

TEST(Synth, CalendarExternals) {
  const DatasetBundle b = synth_generate(ring(7, 3, 2016));
  const SignalDataset &ds = b.data;
  for (std::size_t t = 0; t < ds.slots(); ++t) {
    double day = 0, weather = 0;
    for (std::size_t k = 0; k < 3; ++k) day += ds.externals(t, k);
    for (std::size_t k = 3; k < 7; ++k) weather += ds.externals(t, k);
    ASSERT_EQ(day, 1.0);
    ASSERT_EQ(weather, 1.0);
  }
  EXPECT_EQ(ds.externals(0, 2), 1.0);               // 2018-01-01 holiday
  EXPECT_EQ(ds.externals(288, 0), 1.0);             // Tuesday
  EXPECT_EQ(ds.externals(5 * 288, 1), 1.0);         // Saturday
  EXPECT_EQ(ds.externals(6 * 288 + 100, 1), 1.0);   // Sunday
}
