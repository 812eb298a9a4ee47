#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "bacscan/detector.hpp"
#include "bacscan/iam.hpp"
#include "bacscan/levenshtein.hpp"
#include "bacscan/sim.hpp"

namespace {

std::string random_text(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 25);
  std::string s(n, 'a');
  for (auto& c : s) c = static_cast<char>('a' + pick(rng));
  return s;
}

void BM_NormalizedDissimilarity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::string a = random_text(n, 1);
  const std::string b = random_text(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(bacscan::normalized_dissimilarity(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NormalizedDissimilarity)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_DiffSpans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::string a = random_text(n, 3);
  std::string b = a;
  for (std::size_t i = 0; i < b.size(); i += 17) b[i] = 'Z';
  for (auto _ : state) benchmark::DoNotOptimize(bacscan::diff_spans(a, b));
}
BENCHMARK(BM_DiffSpans)->Arg(256)->Arg(2048)->Arg(8192);

void BM_ScanSensitive(benchmark::State& state) {
  const bacscan::sim::TargetSimulator sim;
  const auto body = sim.respond({"GET", "/users/get-info/?user=*", {}, "", "bench"}).body;
  const bacscan::Detector detector;
  for (auto _ : state) benchmark::DoNotOptimize(detector.scan_sensitive(body));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * body.size()));
}
BENCHMARK(BM_ScanSensitive);

void BM_Classify(benchmark::State& state) {
  const bacscan::sim::TargetSimulator sim;
  const auto own = sim.respond({"GET", "/users/get-info/?user=13495", {}, "", "bench"});
  const auto other = sim.respond({"GET", "/users/get-info/?user=13494", {}, "", "bench"});
  const bacscan::ResponseRecord a{own.status, own.content_type, own.body, 1, std::nullopt};
  const bacscan::ResponseRecord b{other.status, other.content_type, other.body, 1, std::nullopt};
  const bacscan::Detector detector;
  for (auto _ : state) benchmark::DoNotOptimize(detector.classify(a, b));
}
BENCHMARK(BM_Classify);

void BM_GenerateAll(benchmark::State& state) {
  bacscan::BaseRequest base;
  base.method = "POST";
  base.url = "https://api.example/users/13495/orders/1001?page=3&sort=desc";
  base.headers = {{"Authorization", "Bearer t"}, {"Content-Type", "application/json"}, {"X-Trace", "abc"}};
  base.body = R"({"user":13495,"order":1001,"note":"hello"})";
  const auto descriptors = bacscan::IamRegistry::builtin().default_descriptors();
  for (auto _ : state) benchmark::DoNotOptimize(bacscan::generate_all(base, descriptors));
}
BENCHMARK(BM_GenerateAll);

}  // namespace

BENCHMARK_MAIN();
