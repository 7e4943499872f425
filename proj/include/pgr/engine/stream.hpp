#pragma once

// Streaming inference: onset detection, window capture, features and the
// network run on the caller's thread; events cross a drop-oldest ring to a
// writer thread that prints JSON lines and optionally mirrors UDP.

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstring>
#include <functional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "pgr/features.hpp"
#include "pgr/labels.hpp"
#include "pgr/models.hpp"
#include "pgr/onset.hpp"

namespace pgr::engine {

struct StreamEvent {
  std::uint64_t t = 0;
  /// Sample index at which the window was complete and inference ran.
  std::uint64_t ready_sample = 0;
  std::array<float, 4> probs{};
  std::uint32_t n_cl = 0;
  std::array<float, 5> loc_probs{};
  std::uint32_t n_loc = 0;
  std::array<float, 2> emb{};
  float dur_us = 0.0f;
};
static_assert(std::is_trivially_copyable_v<StreamEvent>);

/// Bounded single-producer single-consumer ring. The producer never waits:
/// when full it overwrites the oldest slot, and the consumer counts what it
/// missed. Each slot is a seqlock over atomic words.
template <class T, std::size_t N>
class DropOldestRing {
  static_assert(std::is_trivially_copyable_v<T>);
  static constexpr std::size_t kWords = (sizeof(T) + 7) / 8;

 public:
  static constexpr std::size_t capacity() { return N; }

  void push(const T& v) {
    const std::uint64_t i = head_.load(std::memory_order_relaxed);
    auto& s = slots_[i % N];
    std::array<std::uint64_t, kWords> w{};
    std::memcpy(w.data(), &v, sizeof(T));
    s.seq.store(2 * i + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
    for (std::size_t k = 0; k < kWords; ++k) s.words[k].store(w[k], std::memory_order_relaxed);
    s.seq.store(2 * i + 2, std::memory_order_release);
    head_.store(i + 1, std::memory_order_release);
  }

  /// False when nothing is ready.
  bool pop(T& out) {
    for (;;) {
      const std::uint64_t head = head_.load(std::memory_order_acquire);
      if (tail_ >= head) return false;
      if (head - tail_ > N) {
        dropped_ += head - N - tail_;
        tail_ = head - N;
      }
      auto& s = slots_[tail_ % N];
      const std::uint64_t s1 = s.seq.load(std::memory_order_acquire);
      if (s1 != 2 * tail_ + 2) continue;  // overwritten meanwhile; resync
      std::array<std::uint64_t, kWords> w{};
      for (std::size_t k = 0; k < kWords; ++k) w[k] = s.words[k].load(std::memory_order_relaxed);
      std::atomic_thread_fence(std::memory_order_acquire);
      if (s.seq.load(std::memory_order_relaxed) != s1) continue;
      std::memcpy(static_cast<void*>(&out), w.data(), sizeof(T));
      ++tail_;
      return true;
    }
  }

  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t pushed() const { return head_.load(std::memory_order_acquire); }

 private:
  struct Slot {
    std::atomic<std::uint64_t> seq{0};
    std::array<std::atomic<std::uint64_t>, kWords> words{};
  };
  std::array<Slot, N> slots_{};
  alignas(64) std::atomic<std::uint64_t> head_{0};
  alignas(64) std::uint64_t tail_ = 0;
  std::uint64_t dropped_ = 0;
};

struct StreamOptions {
  onset::OnsetConfig onset;
  std::size_t pre_samples = 0;
  /// Report dur_us as 0, for byte-comparable output across runs.
  bool omit_timing = false;
};

/// Real-time stage. All buffers are sized at construction; process() does
/// not allocate.
class StreamProcessor {
 public:
  static constexpr std::size_t kSubBlock = kWindowSize;
  static constexpr std::size_t kMaxPending = 64;

  StreamProcessor(const models::ModelBundle& b, StreamOptions opt)
      : bundle_(b), opt_(opt), detector_(opt.onset), history_(4 * kWindowSize + opt.pre_samples),
        fx_(feature_kind(b.arch()), b.features), ws_(b.model), feats_(fx_.size()) {
    for (auto& c : block_) c.resize(kSubBlock);
  }

  std::uint64_t samples_seen() const { return history_.total(); }
  std::uint64_t dropped_onsets() const { return dropped_onsets_; }

  /// Feeds interleaved 6-channel frames; calls `emit(const StreamEvent&)`
  /// for every completed capture.
  template <class Emit>
  void process_interleaved(std::span<const float> frames, Emit&& emit) {
    if (frames.size() % kChannels != 0) throw std::invalid_argument("stream: partial frame in chunk");
    const std::size_t n = frames.size() / kChannels;
    for (std::size_t f0 = 0, len = 0; f0 < n; f0 += len) {
      // Stop the sub-block exactly where the oldest pending window fills, so
      // inference runs at the earliest possible sample whatever the chunking.
      len = std::min(kSubBlock, n - f0);
      if (pending_count_ > 0) {
        const auto& e = pending_[pending_head_];
        const std::uint64_t due = e.sample_index - std::min<std::uint64_t>(opt_.pre_samples, e.sample_index) + kWindowSize;
        if (due > history_.total()) len = std::min<std::size_t>(len, due - history_.total());
      }
      for (std::size_t k = 0; k < len; ++k) {
        for (std::size_t c = 0; c < kChannels; ++c) block_[c][k] = frames[(f0 + k) * kChannels + c];
      }
      onset::ChannelChunk chunk;
      for (std::size_t c = 0; c < kChannels; ++c) chunk[c] = std::span<const double>(block_[c].data(), len);
      history_.push(chunk);
      detector_.process(chunk, [&](const onset::OnsetEvent& e) {
        if (pending_count_ == kMaxPending) {
          ++dropped_onsets_;
          return;
        }
        pending_[(pending_head_ + pending_count_++) % kMaxPending] = e;
      });
      complete_pending(emit);
    }
  }

 private:
  template <class Emit>
  void complete_pending(Emit& emit) {
    while (pending_count_ > 0) {
      auto& e = pending_[pending_head_];
      const auto st = onset::capture_window(history_, e, opt_.pre_samples, window_);
      if (st == onset::CaptureStatus::not_ready) return;
      pending_head_ = (pending_head_ + 1) % kMaxPending;
      --pending_count_;
      if (st == onset::CaptureStatus::expired) {
        ++dropped_onsets_;
        continue;
      }
      emit(infer(e));
    }
  }

  StreamEvent infer(const onset::OnsetEvent& e) {
    const auto t0 = std::chrono::steady_clock::now();
    fx_.extract(window_, feats_);
    models::forward<float>(bundle_.model, feats_, ws_);
    const auto t1 = std::chrono::steady_clock::now();
    StreamEvent ev;
    ev.t = e.sample_index;
    ev.ready_sample = history_.total();
    ev.n_cl = static_cast<std::uint32_t>(ws_.class_probs.size());
    std::copy(ws_.class_probs.begin(), ws_.class_probs.end(), ev.probs.begin());
    ev.n_loc = static_cast<std::uint32_t>(ws_.loc_probs.size());
    std::copy(ws_.loc_probs.begin(), ws_.loc_probs.end(), ev.loc_probs.begin());
    ev.emb = models::project_embedding(bundle_, ws_.embedding);
    ev.dur_us = opt_.omit_timing ? 0.0f : std::chrono::duration<float, std::micro>(t1 - t0).count();
    return ev;
  }

  const models::ModelBundle& bundle_;
  StreamOptions opt_;
  onset::OnsetDetector detector_;
  onset::ChannelHistory history_;
  FeatureExtractor fx_;
  models::ModelWorkspace<float> ws_;
  std::vector<float> feats_;
  std::array<std::vector<double>, kChannels> block_;
  MultiChannelWindow window_;
  std::array<onset::OnsetEvent, kMaxPending> pending_{};
  std::size_t pending_head_ = 0, pending_count_ = 0;
  std::uint64_t dropped_onsets_ = 0;
};

// ---------------------------------------------------------------------------
// Output formats

inline std::string event_json(const StreamEvent& e, Task task) {
  nlohmann::json j;
  j["t"] = e.t;
  const auto names = class_names(task);
  nlohmann::json probs = nlohmann::json::object();
  for (std::size_t i = 0; i < e.n_cl && i < names.size(); ++i) probs[names[i]] = e.probs[i];
  j["probs"] = probs;
  if (e.n_loc > 0) {
    nlohmann::json loc = nlohmann::json::object();
    const auto ln = location_names();
    for (std::size_t i = 0; i < e.n_loc; ++i) loc[ln[i]] = e.loc_probs[i];
    j["loc_probs"] = loc;
  }
  j["emb"] = {e.emb[0], e.emb[1]};
  j["dur_us"] = e.dur_us;
  return j.dump();
}

inline constexpr std::size_t kDatagramSize = 64;

/// "PGEV", u64 sample index, f32 probs[4], f32 emb[2], f32 dur_us, zero pad.
inline std::array<std::uint8_t, kDatagramSize> encode_datagram(const StreamEvent& e) {
  std::vector<std::uint8_t> b;
  b.reserve(kDatagramSize);
  b.insert(b.end(), {'P', 'G', 'E', 'V'});
  util::put_le<std::uint64_t>(b, e.t);
  for (float p : e.probs) util::put_le<std::uint32_t>(b, std::bit_cast<std::uint32_t>(p));
  for (float v : e.emb) util::put_le<std::uint32_t>(b, std::bit_cast<std::uint32_t>(v));
  util::put_le<std::uint32_t>(b, std::bit_cast<std::uint32_t>(e.dur_us));
  std::array<std::uint8_t, kDatagramSize> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

class UdpSender {
 public:
  UdpSender(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
      throw std::runtime_error("udp: cannot resolve '" + host + "'");
    std::memcpy(&addr_, res->ai_addr, sizeof(addr_));
    freeaddrinfo(res);
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::runtime_error("udp: socket() failed");
  }
  ~UdpSender() {
    if (fd_ >= 0) ::close(fd_);
  }
  UdpSender(const UdpSender&) = delete;
  UdpSender& operator=(const UdpSender&) = delete;

  bool send(std::span<const std::uint8_t> bytes) const {
    return ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&addr_), sizeof(addr_)) ==
           static_cast<ssize_t>(bytes.size());
  }

 private:
  int fd_ = -1;
  sockaddr_in addr_{};
};

using EventRing = DropOldestRing<StreamEvent, 1024>;

struct StreamSummary {
  std::uint64_t events = 0;
  std::uint64_t dropped = 0;
  std::uint64_t dropped_onsets = 0;
  std::uint64_t samples = 0;
};

/// Runs a whole stream: `read(chunk)` fills interleaved frames and returns
/// how many floats it wrote (0 ends the stream). Events are written as
/// JSON lines to `out` by a separate thread.
inline StreamSummary run_stream(const models::ModelBundle& b, const StreamOptions& opt,
                                const std::function<std::size_t(std::span<float>)>& read, std::size_t chunk_frames,
                                std::ostream& out, UdpSender* udp = nullptr) {
  if (chunk_frames == 0) throw std::invalid_argument("stream: chunk size must be positive");
  const Task task = b.head().hierarchical() ? Task::hierarchical : (b.head().n_cl == 2 ? Task::kick2 : Task::hand4);
  auto ring = std::make_unique<EventRing>();
  std::atomic<bool> done{false};
  StreamSummary sum;
  std::thread writer([&] {
    StreamEvent e;
    for (;;) {
      const bool finished = done.load(std::memory_order_acquire);
      bool any = false;
      while (ring->pop(e)) {
        any = true;
        out << event_json(e, task) << '\n';
        if (udp) udp->send(encode_datagram(e));
        ++sum.events;
      }
      if (finished && !any) break;
      if (!any) std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    out.flush();
  });
  StreamProcessor proc(b, opt);
  std::vector<float> buf(chunk_frames * kChannels);
  try {
    for (;;) {
      const std::size_t n = read(buf);
      if (n == 0) break;
      proc.process_interleaved(std::span<const float>(buf.data(), n), [&](const StreamEvent& e) { ring->push(e); });
    }
  } catch (...) {
    done.store(true, std::memory_order_release);
    writer.join();
    throw;
  }
  done.store(true, std::memory_order_release);
  writer.join();
  sum.dropped = ring->dropped();
  sum.dropped_onsets = proc.dropped_onsets();
  sum.samples = proc.samples_seen();
  return sum;
}

/// Reader over an in-memory interleaved buffer.
inline std::function<std::size_t(std::span<float>)> buffer_reader(std::span<const float> data) {
  auto pos = std::make_shared<std::size_t>(0);
  return [data, pos](std::span<float> dst) {
    const std::size_t n = std::min(dst.size(), data.size() - *pos);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(*pos), n, dst.begin());
    *pos += n;
    return n;
  };
}

}  // namespace pgr::engine
