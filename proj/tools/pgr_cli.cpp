// Command-line front end: synth-data, train, eval, embed, bench, stream.
//
// Exit codes: 0 success, 1 usage, 2 data or format error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pgr/pgr.hpp"

namespace fs = std::filesystem;
using namespace pgr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class E>
std::vector<E> parse_list(const std::string& csv, E (*parse)(std::string_view)) {
  std::vector<E> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

Task task_from(int classes, bool hierarchical) {
  if (hierarchical) {
    if (classes != 4) throw UsageError("--hierarchical requires --classes 4");
    return Task::hierarchical;
  }
  if (classes == 2) return Task::kick2;
  if (classes == 4) return Task::hand4;
  throw UsageError("--classes must be 2 or 4");
}

std::function<bool(const HitLabel&)> label_filter(const std::string& within) {
  if (within.empty() || within == "all") return [](const HitLabel&) { return true; };
  if (within == "kick") return [](const HitLabel& l) { return l.is_kick(); };
  if (within == "non_kick") return [](const HitLabel& l) { return !l.is_kick(); };
  const HandPart h = parse_hand_part(within);
  return [h](const HitLabel& l) { return l.hand_part == h; };
}

void print_metrics(const std::string& title, const eval::Metrics& m) {
  std::printf("%s\n", title.c_str());
  std::printf("  %-12s %9s %9s %9s %8s\n", "class", "P%", "R%", "F%", "support");
  for (const auto& k : m.per_class) {
    std::printf("  %-12s %9.2f %9.2f %9.2f %8llu\n", k.label.c_str(), 100 * k.precision, 100 * k.recall, 100 * k.f,
                static_cast<unsigned long long>(k.support));
  }
  std::printf("  %-12s %9.2f %9.2f %9.2f\n", "W/Avg", 100 * m.weighted_precision, 100 * m.weighted_recall,
              100 * m.weighted_f);
  if (m.recall_only) std::printf("  single-class ground truth: precision is 1 by construction, read recall only\n");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Percussion gesture recognition toolkit"};
  app.require_subcommand(1);
  bool non_strict = false;
  app.add_flag("--non-strict", non_strict, "Warn instead of failing on unknown manifest fields");

  // synth-data
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate a labelled synthetic multi-channel dataset");
  synth::SynthConfig sc;
  std::string synth_out, profile = "none", profile_gains, hand_parts, locations, dynamics;
  double profile_tilt = 0.0;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", sc.seed);
  synth_cmd->add_option("--hits-per-class", sc.hits_per_class, "Hits per hand/location combination");
  synth_cmd->add_option("--separation", sc.separation)->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--noise-floor-db", sc.noise_floor_db);
  synth_cmd->add_option("--spacing", sc.hit_spacing_s, "Seconds between hits");
  synth_cmd->add_option("--profile", profile, "Interface profile preset")->check(CLI::IsMember({"none", "shifted"}));
  synth_cmd->add_option("--profile-gains", profile_gains, "Six comma-separated channel gains in dB");
  synth_cmd->add_option("--profile-tilt", profile_tilt, "Spectral tilt in dB (positive boosts highs)");
  synth_cmd->add_option("--hand-parts", hand_parts, "Comma-separated subset");
  synth_cmd->add_option("--locations", locations, "Comma-separated subset");
  synth_cmd->add_option("--dynamics", dynamics, "Comma-separated subset");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network on a manifest");
  std::string manifest, arch = "perc_cnn", bundle_out, selection = "val", report_dir;
  int classes = 2;
  bool hierarchical = false, no_augment = false;
  engine::TrainConfig tc;
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--arch", arch)->check(CLI::IsMember({"tabla_cnn", "perc_cnn", "perc_vae"}));
  train_cmd->add_option("--classes", classes)->check(CLI::IsMember({2, 4}));
  train_cmd->add_flag("--hierarchical", hierarchical, "Add the 5-way location head");
  train_cmd->add_option("--epochs", tc.epochs);
  train_cmd->add_option("--batch", tc.batch_size);
  train_cmd->add_option("--lr", tc.learning_rate);
  train_cmd->add_option("--seed", tc.seed);
  train_cmd->add_option("--selection", selection, "Model selection set")->check(CLI::IsMember({"val", "paper"}));
  train_cmd->add_flag("--no-augment", no_augment);
  train_cmd->add_option("--out", bundle_out, "Bundle path")->required();
  train_cmd->add_option("--report", report_dir, "Write a held-out test report here");
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a bundle on one or more manifests");
  std::string bundle_path;
  std::vector<std::string> manifests;
  std::string eval_out;
  eval_cmd->add_option("--bundle", bundle_path)->required();
  eval_cmd->add_option("--manifest", manifests, "Repeatable; each is evaluated separately")->required();
  eval_cmd->add_option("--out", eval_out, "Report directory");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Export 2-D embeddings and a KL matrix");
  std::string embed_manifest, facet = "dynamics", within = "all", embed_out;
  embed_cmd->add_option("--bundle", bundle_path)->required();
  embed_cmd->add_option("--manifest", embed_manifest)->required();
  embed_cmd->add_option("--facet", facet)->check(CLI::IsMember({"dynamics", "location", "hand_part"}));
  embed_cmd->add_option("--within", within, "all, kick, non_kick or a hand part");
  embed_cmd->add_option("--out", embed_out)->required();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time forward passes");
  std::size_t calls = 10000;
  bool with_features = false, bench_json = false;
  bench_cmd->add_option("--bundle", bundle_path)->required();
  bench_cmd->add_option("--calls", calls)->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--include-features", with_features);
  bench_cmd->add_flag("--json", bench_json);

  // stream
  auto* stream_cmd = app.add_subcommand("stream", "Detect hits in audio and print one JSON event per line");
  std::string input = "-", udp;
  std::size_t chunk = 256;
  engine::StreamOptions so;
  stream_cmd->add_option("--bundle", bundle_path)->required();
  stream_cmd->add_option("--input", input, "WAV file, or - for raw interleaved float32 frames on stdin");
  stream_cmd->add_option("--chunk", chunk, "Frames per read")->check(CLI::PositiveNumber);
  stream_cmd->add_option("--threshold", so.onset.threshold);
  stream_cmd->add_option("--refractory-ms", so.onset.refractory_ms);
  stream_cmd->add_flag("--omit-timing", so.omit_timing, "Print dur_us as 0");
  stream_cmd->add_option("--udp", udp, "host:port for 64-byte event datagrams");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  data::ManifestOptions mo;
  mo.strict = !non_strict;

  if (*synth_cmd) {
    if (profile == "shifted") sc.interface_profile = synth::shifted_profile();
    if (!profile_gains.empty()) {
      const auto g = parse_doubles(profile_gains);
      if (g.size() != kChannels) throw UsageError("--profile-gains needs 6 values");
      std::copy(g.begin(), g.end(), sc.interface_profile.gain_db.begin());
    }
    if (profile_tilt != 0.0) sc.interface_profile.tilt_db = profile_tilt;
    if (!hand_parts.empty()) sc.hand_parts = parse_list<HandPart>(hand_parts, parse_hand_part);
    if (!locations.empty()) sc.locations = parse_list<Location>(locations, parse_location);
    if (!dynamics.empty()) sc.dynamics = parse_list<Dynamics>(dynamics, parse_dynamics);
    const auto m = synth::synth_generate(sc, synth_out);
    std::printf("wrote %zu hits to %s\n", m.entries.size(), (fs::path(synth_out) / "manifest.jsonl").c_str());
    return 0;
  }

  if (*train_cmd) {
    tc.arch = models::architecture_from_string(arch);
    tc.task = task_from(classes, hierarchical);
    tc.selection = engine::parse_selection(selection);
    if (no_augment) tc.augment = data::AugmentPolicy::none();
    if (!quiet) {
      tc.on_epoch = [&](std::size_t e, double loss, double acc) {
        std::fprintf(stderr, "epoch %zu/%zu loss %.5f %s-acc %.4f\n", e, tc.epochs, loss, selection.c_str(), acc);
      };
    }
    const auto ds = data::load_dataset(manifest, mo);
    const auto res = engine::train(ds, tc);
    models::save_bundle(res.bundle, bundle_out);
    const auto ev = engine::evaluate(res.bundle, ds, res.split.test);
    print_metrics("held-out test (" + std::to_string(res.split.test.size()) + " hits)", ev.metrics);
    if (ev.loc_metrics) print_metrics("location", *ev.loc_metrics);
    std::printf("best epoch %zu, bundle %s (%s)\n", res.bundle.training.best_epoch, bundle_out.c_str(),
                models::bundle_hash(res.bundle).c_str());
    if (!report_dir.empty()) {
      eval::emit_report(engine::make_report(res.bundle, ds, ev), &ev.embeddings, report_dir);
    }
    return 0;
  }

  if (*eval_cmd) {
    const auto b = models::load_bundle(bundle_path);
    const auto results = engine::cross_dataset_eval(b, manifests, mo);
    int rc = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (!r.report) {
        std::fprintf(stderr, "%s: %s\n", r.manifest.c_str(), r.error.c_str());
        rc = kExitData;
        continue;
      }
      print_metrics(r.manifest, *r.report->metrics);
      if (r.report->location_metrics) print_metrics("location", *r.report->location_metrics);
      if (!eval_out.empty()) {
        const auto dir = results.size() == 1 ? fs::path(eval_out) : fs::path(eval_out) / std::to_string(i);
        eval::emit_report(*r.report, nullptr, dir);
      }
    }
    return rc;
  }

  if (*embed_cmd) {
    const auto b = models::load_bundle(bundle_path);
    const auto ds = data::load_dataset(embed_manifest, mo);
    const auto ev = engine::evaluate(b, ds);
    auto r = engine::make_report(b, ds, ev);
    const Facet f = parse_facet(facet);
    r.kl.push_back(eval::kl_matrix(ev.embeddings, f, label_filter(within)));
    const auto path = eval::emit_report(r, &ev.embeddings, embed_out);
    const auto& k = r.kl.back();
    std::printf("KL(row || column) over %s, %s\n", facet.c_str(), within.c_str());
    std::printf("%-12s", "");
    for (const auto& l : k.labels) std::printf("%12s", l.c_str());
    std::printf("\n");
    for (std::size_t i = 0; i < k.labels.size(); ++i) {
      std::printf("%-12s", k.labels[i].c_str());
      for (const auto& v : k.matrix[i]) {
        if (v) std::printf("%12.4f", *v);
        else std::printf("%12s", "missing");
      }
      std::printf("\n");
    }
    std::printf("report %s\n", path.c_str());
    return 0;
  }

  if (*bench_cmd) {
    const auto b = models::load_bundle(bundle_path);
    const auto r = engine::bench(b, calls, with_features);
    if (bench_json) {
      std::printf("%s\n", engine::bench_json(r).dump().c_str());
    } else {
      std::printf("%s", engine::bench_table({r}).c_str());
      std::printf("calls %zu, p99 %.2f us%s\n", r.n_calls, r.p99_us,
                  r.jitter_flag ? " (p99 above 10x mean: noisy machine)" : "");
    }
    return 0;
  }

  if (*stream_cmd) {
    const auto b = models::load_bundle(bundle_path);
    std::unique_ptr<engine::UdpSender> sender;
    if (!udp.empty()) {
      const auto colon = udp.rfind(':');
      if (colon == std::string::npos) throw UsageError("--udp expects host:port");
      sender = std::make_unique<engine::UdpSender>(udp.substr(0, colon),
                                                   static_cast<std::uint16_t>(std::stoi(udp.substr(colon + 1))));
    }
    engine::StreamSummary sum;
    if (input == "-") {
      auto read = [](std::span<float> dst) {
        const std::size_t frames = dst.size() / kChannels;
        const std::size_t got = std::fread(dst.data(), sizeof(float) * kChannels, frames, stdin);
        return got * kChannels;
      };
      sum = engine::run_stream(b, so, read, chunk, std::cout, sender.get());
    } else {
      const auto audio = wav::read(input);
      if (audio.channels != kChannels)
        throw data::DataError("stream: input has " + std::to_string(audio.channels) + " channels, expected 6");
      if (audio.sample_rate != static_cast<std::uint32_t>(kSampleRate))
        throw data::DataError("stream: input must be 44100 Hz");
      sum = engine::run_stream(b, so, engine::buffer_reader(audio.interleaved), chunk, std::cout, sender.get());
    }
    if (sum.dropped || sum.dropped_onsets)
      std::fprintf(stderr, "dropped %llu events, %llu onsets\n", static_cast<unsigned long long>(sum.dropped),
                   static_cast<unsigned long long>(sum.dropped_onsets));
    return 0;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const eval::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const models::UnsupportedConfiguration& e) {
    std::fprintf(stderr, "unsupported configuration: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
