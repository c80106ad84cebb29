// Mutation fuzzer for the OSC and frame decoders. Built with ASan and UBSan;
// every input lives in a heap block of exactly its own size, so any read past
// the end aborts the process.
//
// Duration: first argument in seconds, else MMII_FUZZ_SECONDS, else 600.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <random>
#include <string>

#include "mmii/error.hpp"
#include "mmii/frame.hpp"
#include "mmii/osc.hpp"
#include "support/osc_random.hpp"

using namespace mmii;
using osc::Bytes;

namespace {

std::string outcome;

void run_one(const Bytes& input) {
  const std::size_t n = input.size();
  std::unique_ptr<std::uint8_t[]> heap(new std::uint8_t[n == 0 ? 1 : n]);
  if (n) std::memcpy(heap.get(), input.data(), n);
  const std::span<const std::uint8_t> data(heap.get(), n);

  try {
    const auto msgs = osc::decode_packet(data);
    outcome = "packet:ok";
    for (const auto& m : msgs) outcome += m.type_tags().substr(0, 6);
    if (!osc::is_bundle(data)) {
      // Strict decoding is canonical: accepted bytes re-encode to themselves.
      if (osc::encode(msgs.front()) != input) {
        std::fprintf(stderr, "re-encode mismatch\n");
        std::abort();
      }
    }
  } catch (const Error& e) {
    outcome = std::string("packet:") + std::to_string(static_cast<int>(e.code()));
  }

  try {
    wire::decode_audio(data);
  } catch (const Error&) {
  }

  wire::FrameDecoder dec;
  for (std::size_t i = 0; i < n; i += 7) {
    dec.feed(data.subspan(i, std::min<std::size_t>(7, n - i)));
    try {
      while (auto f = dec.next()) {
        outcome += ":frame";
        try {
          if (f->kind == wire::FrameKind::audio) {
            wire::decode_audio(f->payload);
          } else {
            osc::decode_packet(f->payload);
          }
        } catch (const Error&) {
        }
      }
    } catch (const Error&) {
      break;
    }
  }
}

Bytes be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

Bytes mutate(Bytes b, std::mt19937_64& rng, const std::vector<Bytes>& corpus) {
  auto below = [&](std::uint64_t k) { return k == 0 ? 0 : rng() % k; };
  const int rounds = 1 + static_cast<int>(below(4));
  for (int r = 0; r < rounds; ++r) {
    switch (below(9)) {
      case 0:
        if (!b.empty()) b[below(b.size())] ^= static_cast<std::uint8_t>(1u << below(8));
        break;
      case 1: {
        static const std::uint8_t kInteresting[] = {0, 1, 0x7f, 0x80, 0xff, ',', '/', '#', 'i', 'f', 's', 'b', 'q'};
        if (!b.empty()) b[below(b.size())] = kInteresting[below(sizeof(kInteresting))];
        break;
      }
      case 2:
        b.resize(below(b.size() + 1));
        break;
      case 3:
        b.insert(b.begin() + static_cast<std::ptrdiff_t>(below(b.size() + 1)), below(9), static_cast<std::uint8_t>(rng()));
        break;
      case 4:
        if (!b.empty()) b.erase(b.begin() + static_cast<std::ptrdiff_t>(below(b.size())));
        break;
      case 5: {
        // Overwrite an aligned word with a length-like value.
        static const std::uint32_t kWords[] = {0, 1, 3, 4, 0x7fffffff, 0x80000000, 0xffffffff, 0x100000, 0x100001};
        if (b.size() >= 4) {
          const std::size_t at = below(b.size() / 4) * 4;
          const Bytes w = be32(kWords[below(std::size(kWords))] + static_cast<std::uint32_t>(below(3)));
          std::copy(w.begin(), w.end(), b.begin() + static_cast<std::ptrdiff_t>(at));
        }
        break;
      }
      case 6: {
        const Bytes& other = corpus[below(corpus.size())];
        const std::size_t at = below(b.size() + 1);
        const std::size_t from = below(other.size() + 1);
        b.resize(at);
        b.insert(b.end(), other.begin() + static_cast<std::ptrdiff_t>(from), other.end());
        break;
      }
      case 7: {
        // Wrap in a bundle element or a frame header.
        Bytes w = below(2) ? Bytes{'#', 'b', 'u', 'n', 'd', 'l', 'e', 0, 0, 0, 0, 0, 0, 0, 0, 1} : Bytes{};
        const Bytes len = be32(static_cast<std::uint32_t>(b.size() + (w.empty() ? 1 : 0)));
        w.insert(w.end(), len.begin(), len.end());
        if (w.size() == 4) w.push_back(static_cast<std::uint8_t>(1 + below(3)));
        w.insert(w.end(), b.begin(), b.end());
        b = std::move(w);
        break;
      }
      default:
        b.resize((b.size() + 3) & ~std::size_t{3}, 0);
        break;
    }
    if (b.size() > 4096) b.resize(4096);
  }
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  double seconds = 600.0;
  if (const char* env = std::getenv("MMII_FUZZ_SECONDS")) seconds = std::atof(env);
  if (argc > 1) seconds = std::atof(argv[1]);
  std::uint64_t seed = 0x5eed;
  if (argc > 2) seed = std::strtoull(argv[2], nullptr, 10);

  std::mt19937_64 rng(seed);
  std::vector<Bytes> corpus;
  for (int i = 0; i < 64; ++i) corpus.push_back(osc::encode(testing::random_message(rng)));
  for (int i = 0; i < 16; ++i) {
    std::vector<osc::Message> ms;
    for (int k = 0; k < 3; ++k) ms.push_back(testing::random_message(rng));
    corpus.push_back(osc::encode_bundle(ms));
  }
  const std::vector<float> audio = {0.5f, -0.5f, 0.25f, 0.0f};
  corpus.push_back(wire::encode_audio(3, 2, audio));
  corpus.push_back(wire::encode_frame(wire::FrameKind::osc, osc::encode(osc::make_prox("tumor", 0.25f))));
  corpus.push_back({});

  std::map<std::string, std::uint64_t> seen;
  std::uint64_t execs = 0;
  const auto t0 = std::chrono::steady_clock::now();
  double elapsed = 0.0;
  while (elapsed < seconds) {
    for (int batch = 0; batch < 256; ++batch) {
      Bytes in = mutate(corpus[rng() % corpus.size()], rng, corpus);
      run_one(in);
      ++execs;
      if (seen[outcome]++ == 0 && corpus.size() < 8192) corpus.push_back(std::move(in));
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::printf("fuzz_osc: %llu executions in %.1f s, %zu outcome classes, corpus %zu\n",
              static_cast<unsigned long long>(execs), elapsed, seen.size(), corpus.size());
  return 0;
}
