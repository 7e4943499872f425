#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "pgr/data.hpp"
#include "pgr/synth.hpp"

using namespace pgr;
using namespace pgr::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pgr_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DatasetManifest parse(const std::string& text, const ManifestOptions& opt = {}) {
  std::istringstream in(text);
  return parse_manifest(in, opt);
}

const char* kLine =
    R"({"audio":"a.wav","onset_sample":100,"gesture":"hit","hand_part":"thumb","location":"upper_bout","dynamics":"mf"})";

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

void write_silence(const fs::path& p, std::size_t frames, std::uint16_t channels, std::uint32_t rate = 44100) {
  wav::Audio a;
  a.sample_rate = rate;
  a.channels = channels;
  a.interleaved.assign(frames * channels, 0.0f);
  wav::write(p.string(), a);
}

}  // namespace

TEST(Manifest, ParsesEntry) {
  const auto m = parse(std::string(kLine) + "\n\n");
  ASSERT_EQ(m.entries.size(), 1u);
  const auto& e = m.entries[0];
  EXPECT_EQ(e.audio, "a.wav");
  EXPECT_EQ(e.onset_sample, 100u);
  EXPECT_EQ(e.label.hand_part, HandPart::thumb);
  EXPECT_EQ(e.label.location, Location::upper_bout);
  EXPECT_EQ(e.label.dynamics, Dynamics::mf);
  EXPECT_FALSE(e.split.has_value());
  EXPECT_EQ(parse(manifest_text(m)).entries, m.entries);
}

TEST(Manifest, EmptyManifestGivesEmptyDataset) {
  const auto m = parse("");
  EXPECT_TRUE(m.entries.empty());
  EXPECT_TRUE(load_dataset(m).empty());
}

TEST(Manifest, StrictUnknownFieldNamesLine) {
  std::string text = std::string(kLine) + "\n";
  std::string extra = kLine;
  extra.insert(extra.size() - 1, R"(,"mic":"x")");
  text += extra + "\n";
  const auto msg = error_of([&] { parse(text); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("mic"), std::string::npos) << msg;

  std::vector<std::string> warnings;
  ManifestOptions lax;
  lax.strict = false;
  lax.warn = [&](const std::string& w) { warnings.push_back(w); };
  EXPECT_EQ(parse(text, lax).entries.size(), 2u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("mic"), std::string::npos);
}

TEST(Manifest, RejectsBadEntries) {
  auto with = [](const std::string& from, const std::string& to) {
    std::string s = kLine;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  EXPECT_THROW(parse(with("\"hit\"", "\"scrape\"")), DataError);
  EXPECT_THROW(parse(with("\"thumb\"", "\"palm\"")), DataError);
  EXPECT_THROW(parse(with("100", "-1")), DataError);
  EXPECT_THROW(parse(with("100", "\"100\"")), DataError);
  EXPECT_THROW(parse("{not json"), DataError);
  EXPECT_THROW(parse("[1,2]"), DataError);
  EXPECT_THROW(parse(R"({"audio":"a.wav"})"), DataError);

  const auto excluded = with("\"thumb\",\"location\":\"upper_bout\"", "\"heel\",\"location\":\"lower_side\"");
  const auto msg = error_of([&] { parse(excluded); });
  EXPECT_NE(msg.find("exclusion"), std::string::npos) << msg;
  ManifestOptions none;
  none.exclusions.clear();
  EXPECT_EQ(parse(excluded, none).entries.size(), 1u);
}

TEST(LoadDataset, ErrorsNameTheEntry) {
  const auto dir = scratch("load");
  write_silence(dir / "six.wav", 2000, 6);
  write_silence(dir / "two.wav", 2000, 2);
  write_silence(dir / "slow.wav", 2000, 6, 48000);

  auto manifest_for = [&](const std::string& file, std::uint64_t onset) {
    DatasetManifest m;
    m.base_dir = dir;
    m.entries.push_back({"six.wav", 0, {}, std::nullopt});
    m.entries.push_back({file, onset, {}, std::nullopt});
    return m;
  };
  EXPECT_EQ(load_dataset(manifest_for("six.wav", 2000 - 512)).size(), 2u);

  auto msg = error_of([&] { load_dataset(manifest_for("missing.wav", 0)); });
  EXPECT_NE(msg.find("entry 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("missing.wav"), std::string::npos) << msg;

  msg = error_of([&] { load_dataset(manifest_for("two.wav", 0)); });
  EXPECT_NE(msg.find("entry 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("channels"), std::string::npos) << msg;

  msg = error_of([&] { load_dataset(manifest_for("slow.wav", 0)); });
  EXPECT_NE(msg.find("Hz"), std::string::npos) << msg;

  msg = error_of([&] { load_dataset(manifest_for("six.wav", 2000 - 100)); });
  EXPECT_NE(msg.find("entry 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("exceeds"), std::string::npos) << msg;
  fs::remove_all(dir);
}

TEST(LoadDataset, SynthRoundTrip) {
  const auto dir = scratch("synth");
  synth::SynthConfig cfg;
  cfg.seed = 5;
  cfg.hits_per_class = 2;
  const auto m = synth::synth_generate(cfg, dir);
  EXPECT_EQ(m.entries.size(), 2u * 19u);

  const auto ds = load_dataset((dir / "manifest.jsonl").string());
  ASSERT_EQ(ds.size(), m.entries.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds[i].label, m.entries[i].label);
    double peak = 0;
    for (const auto& c : ds[i].window.ch) {
      for (double v : c) peak = std::max(peak, std::abs(v));
    }
    EXPECT_GT(peak, 0.01) << i;
  }

  const auto again = load_dataset(synth::synth_generate(cfg, scratch("synth2")));
  EXPECT_EQ(dataset_hash(again), dataset_hash(ds));
  cfg.seed = 6;
  EXPECT_NE(dataset_hash(load_dataset(synth::synth_generate(cfg, scratch("synth3")))), dataset_hash(ds));
  for (const auto* n : {"synth", "synth2", "synth3"}) fs::remove_all(fs::temp_directory_path() / (std::string("pgr_test_data_") + n));
}

TEST(Synth, CountsAndKickPartition) {
  synth::SynthConfig cfg;
  cfg.seed = 1;
  cfg.hits_per_class = 10;
  const auto files = synth::synth_render(cfg);
  EXPECT_EQ(files.size(), 19u);
  EXPECT_EQ(synth::valid_combinations(cfg).size(), 19u);

  const auto a = synth::synth_render(cfg);
  ASSERT_EQ(a.size(), files.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].audio.interleaved, files[i].audio.interleaved);

  const auto dir = scratch("kick");
  const auto m = synth::synth_generate(cfg, dir);
  EXPECT_EQ(m.entries.size(), 190u);
  std::size_t kick = 0;
  for (const auto& e : m.entries) {
    EXPECT_FALSE(is_excluded(e.label, default_exclusions()));
    kick += e.label.is_kick();
    EXPECT_EQ(e.label.is_kick(), e.label.hand_part == HandPart::heel);
  }
  EXPECT_EQ(kick, 40u);
  fs::remove_all(dir);

  cfg.separation = 1.5;
  EXPECT_THROW(synth::synth_render(cfg), std::invalid_argument);
}

namespace {

// Largest remainder on a single stratum collapses to rounding n * frac.
std::size_t rounded(std::size_t n, double frac) { return static_cast<std::size_t>(std::llround(n * frac)); }

void expect_partition(const Split& s, std::size_t n) {
  std::set<std::size_t> all;
  for (const auto* v : {&s.train, &s.val, &s.test}) {
    EXPECT_TRUE(std::is_sorted(v->begin(), v->end()));
    all.insert(v->begin(), v->end());
  }
  EXPECT_EQ(all.size(), n);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), n);
  if (n) {
    EXPECT_EQ(*all.rbegin(), n - 1);
  }
}

}  // namespace

TEST(Split, FiftyFiftyClassesGiveTenAndTen) {
  std::vector<std::size_t> keys(100);
  for (std::size_t i = 0; i < 100; ++i) keys[i] = i % 2;
  const auto s = stratified_split(keys, 0.2, 0.0, 1);
  std::array<int, 2> per{};
  for (auto i : s.test) ++per[keys[i]];
  EXPECT_EQ(per[0], 10);
  EXPECT_EQ(per[1], 10);
  expect_partition(s, 100);
}

TEST(Split, SizesDeterminismAndDisjointness) {
  std::vector<std::size_t> keys(3157);
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = (i * 7) % 5;
  const auto s = stratified_split(keys, 0.2, 0.1, 42);
  EXPECT_TRUE(s.test.size() == 631 || s.test.size() == 632) << s.test.size();
  EXPECT_EQ(s.val.size(), rounded(keys.size() - s.test.size(), 0.1));
  expect_partition(s, keys.size());

  const auto t = stratified_split(keys, 0.2, 0.1, 42);
  EXPECT_EQ(s.train, t.train);
  EXPECT_EQ(s.val, t.val);
  EXPECT_EQ(s.test, t.test);
  EXPECT_NE(stratified_split(keys, 0.2, 0.1, 43).test, s.test);

  std::vector<std::size_t> one(57, 3);
  EXPECT_EQ(stratified_split(one, 0.2, 0.0, 0).test.size(), rounded(57, 0.2));
}

TEST(Split, RandomPartitionProperty) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t classes = 1 + rng() % 6;
    std::vector<std::size_t> keys;
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t n = 5 + rng() % 60;
      for (std::size_t i = 0; i < n; ++i) keys.push_back(c);
    }
    std::shuffle(keys.begin(), keys.end(), rng);
    const double tf = 0.05 + 0.5 * (rng() % 100) / 100.0;
    const auto s = stratified_split(keys, tf, 0.1, rng());
    expect_partition(s, keys.size());
    EXPECT_EQ(s.test.size(), rounded(keys.size(), tf));
    // Each stratum within one of its exact share.
    for (std::size_t c = 0; c < classes; ++c) {
      const double n = static_cast<double>(std::count(keys.begin(), keys.end(), c));
      const double got = static_cast<double>(std::count_if(s.test.begin(), s.test.end(), [&](auto i) { return keys[i] == c; }));
      EXPECT_LT(std::abs(got - n * tf), 1.0 + 1e-9);
    }
  }
}

TEST(Split, SmallStratumThrows) {
  std::vector<std::size_t> keys(20, 0);
  for (int i = 0; i < 4; ++i) keys.push_back(1);
  EXPECT_THROW(stratified_split(keys, 0.2, 0.0, 0), StratificationError);
  EXPECT_THROW(stratified_split(keys, 1.0, 0.0, 0), std::invalid_argument);
}

TEST(Rebalance, UndersamplesMajority) {
  std::vector<std::size_t> keys(150, 0);
  for (std::size_t i = 100; i < 150; ++i) keys[i] = 1;
  const auto kept = rebalance(keys, RebalanceMode::undersample, 3);
  EXPECT_EQ(kept.size(), 100u);
  EXPECT_EQ(std::count_if(kept.begin(), kept.end(), [&](auto i) { return keys[i] == 0; }), 50);
  EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
  EXPECT_EQ(rebalance(keys, RebalanceMode::none, 3).size(), 150u);

  std::vector<std::size_t> balanced{0, 1, 2, 0, 1, 2};
  const auto same = rebalance(balanced, RebalanceMode::undersample, 1);
  EXPECT_EQ(same, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(Rebalance, RandomProperty) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<std::size_t> keys(1 + rng() % 300);
    for (auto& k : keys) k = rng() % 4;
    const auto kept = rebalance(keys, RebalanceMode::undersample, rng());
    std::map<std::size_t, std::size_t> in, out;
    for (auto k : keys) ++in[k];
    for (auto i : kept) ++out[keys[i]];
    std::size_t minority = keys.size();
    for (auto [k, n] : in) minority = std::min(minority, n);
    for (auto [k, n] : in) EXPECT_EQ(out[k], minority);
    EXPECT_EQ(std::set<std::size_t>(kept.begin(), kept.end()).size(), kept.size());
  }
}

namespace {

MultiChannelWindow random_window(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.2);
  MultiChannelWindow w;
  for (auto& c : w.ch) {
    for (auto& v : c) v = g(rng);
  }
  return w;
}

}  // namespace

TEST(Augment, EmptyPolicyIsIdentity) {
  const auto w = random_window(1);
  nn::Rng rng(0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(augment(w, AugmentPolicy::none(), rng), w);
  EXPECT_TRUE(AugmentPolicy::none().empty());
}

TEST(Augment, PhaseOnlyTwiceIsIdentity) {
  AugmentPolicy p = AugmentPolicy::none();
  p.phase_invert = true;
  p.probability = 1.0;
  const auto w = random_window(2);
  nn::Rng rng(0);
  const auto once = augment(w, p, rng);
  for (std::size_t c = 0; c < kChannels; ++c) EXPECT_EQ(once.ch[c][7], -w.ch[c][7]);
  EXPECT_EQ(augment(once, p, rng), w);
}

TEST(Augment, ReproducibleAndAlignedDraws) {
  AugmentPolicy p;
  const auto w = random_window(3);
  nn::Rng a(77), b(77);
  std::vector<MultiChannelWindow> ra, rb;
  for (int i = 0; i < 20; ++i) {
    ra.push_back(augment(w, p, a));
    rb.push_back(augment(w, p, b));
  }
  EXPECT_EQ(ra, rb);
  bool changed = false;
  for (const auto& r : ra) changed |= !(r == w);
  EXPECT_TRUE(changed);

  // Disabled transforms still consume the same draws.
  nn::Rng c(77), d(77);
  augment(w, AugmentPolicy::none(), c);
  augment(w, p, d);
  EXPECT_EQ(c(), d());
}

TEST(Augment, GainStaysInRange) {
  AugmentPolicy p = AugmentPolicy::none();
  p.channel_gain = true;
  p.probability = 1.0;
  MultiChannelWindow w;
  for (auto& c : w.ch) c.fill(1.0);
  nn::Rng rng(5);
  const double lo = dsp::db_to_gain(-6.0), hi = dsp::db_to_gain(6.0);
  for (int i = 0; i < 200; ++i) {
    const auto r = augment(w, p, rng);
    for (const auto& c : r.ch) {
      EXPECT_GE(c[0], lo - 1e-12);
      EXPECT_LE(c[0], hi + 1e-12);
      EXPECT_EQ(c[0], c[511]);
    }
  }
}
