// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "support.hpp"

using namespace vpp;
using namespace vpp::testing;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Collects failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int g_failed = 0;

void report(const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  if (c.failures.empty()) {
    std::cout << "PASS " << name << "\n";
  } else {
    ++g_failed;
    std::cout << "FAIL " << name << ": " << c.failures.front();
    if (c.failures.size() > 1) std::cout << " (+" << c.failures.size() - 1 << " more)";
    std::cout << "\n";
  }
  std::cout.flush();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (a.at(x, y) && !b.at(x, y)) return false;
    }
  }
  return true;
}

std::vector<Bytes> sample_bytes() {
  std::vector<Bytes> out;
  for (int i = 0; i < 5; ++i) out.push_back(read_file_bytes(fixtures() / "images" / "samples" / ("sample_" + std::to_string(i) + ".png")));
  return out;
}

GenerationRun run_scenario(const StubScenario& s, int max_attempts, std::uint64_t base_seed,
                           std::optional<std::uint64_t> pinned = std::nullopt, bool filter = true) {
  auto cs = counted_scenario(s, echo_dot_profile());
  auto store = std::make_shared<MemoryArtifactStore>();
  const auto profile = registered(echo_dot_profile(), *cs.world);
  GenerationRequest req;
  req.product_id = profile.product_id;
  req.background_ref = store->put_png(pattern_image(24, 24, 1));
  req.config.max_attempts = max_attempts;
  req.base_seed = base_seed;
  req.pinned_seed = pinned;
  req.filter_enabled = filter;
  return Orchestrator(cs.providers, store).generate(req, profile);
}

// -- criteria ---------------------------------------------------------------

void fr_golden(Check& c) {
  const auto t0 = Clock::now();
  struct Cell {
    long s, f;
    double fr;
  };
  for (const auto& cell : {Cell{72, 28, 38.89}, Cell{94, 6, 6.38}, Cell{87, 13, 14.94}, Cell{100, 0, 0.00}}) {
    // oracle: failures per success as a percentage
    const double oracle = 100.0 * static_cast<double>(cell.f) / static_cast<double>(cell.s);
    const double got = failure_rate(cell.s, cell.f);
    c.expect(std::abs(got - cell.fr) <= 0.005, "FR(" + std::to_string(cell.s) + "," + std::to_string(cell.f) + ") = " + fmt(got));
    c.expect(std::abs(got - oracle) <= 0.005, "FR disagrees with oracle " + fmt(oracle));
  }
  // the same cells from the shipped record fixtures
  for (const auto& [file, naive, aligned] : {std::tuple{"echo_dot_content_records.json", 38.89, 6.38},
                                             std::tuple{"lupure_content_records.json", 14.94, 0.00}}) {
    const auto records = json::parse(read_file_text(fixtures() / file)).get<std::vector<EvaluationRecord>>();
    const auto report = build_report(records);
    c.expect(std::abs(report.at("conditions").at("naive").at("FR").get<double>() - naive) <= 0.005, std::string(file) + " naive FR");
    c.expect(std::abs(report.at("conditions").at("alignment").at("FR").get<double>() - aligned) <= 0.005,
             std::string(file) + " alignment FR");
  }
  const double ms = ms_since(t0);
  c.expect(ms < 1000.0, "runtime " + fmt(ms) + " ms");
}

/// Draws scripted attempts until the similarities fit unit embeddings.
template <class Draw>
StubScenario realizable(std::mt19937_64& rng, int n, Draw draw, int& redraws) {
  for (;;) {
    StubScenario s;
    s.dimension = 16;
    s.attempts.clear();
    for (int i = 0; i < n; ++i) s.attempts.push_back(draw(rng));
    try {
      ScenarioWorld(s, echo_dot_profile());
      return s;
    } catch (const ScenarioError&) {
      ++redraws;
    }
  }
}

void cascade_guarantee(Check& c) {
  std::mt19937_64 rng(20260);
  std::uniform_real_distribution<double> cosv(0.0, 0.4);
  std::uniform_real_distribution<double> qv(0.5, 0.9);
  std::uniform_int_distribution<int> budget(1, 4);
  const AlignmentConfig cfg;
  int accepted = 0, checked = 0, redraws = 0;
  auto any = [&](std::mt19937_64& g) {
    ScriptedAttempt a;
    a.content = {cosv(g), cosv(g)};
    a.quality = qv(g);
    a.volume = {cosv(g), cosv(g), cosv(g)};
    return a;
  };
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = budget(rng);
    const auto s = realizable(rng, n, any, redraws);
    const auto run = run_scenario(s, n, static_cast<std::uint64_t>(trial) * 16);
    ++checked;
    if (!run_violations(run).empty()) c.expect(false, "run invariants violated in trial " + std::to_string(trial));
    if (run.status != RunStatus::accepted) continue;
    ++accepted;
    const auto& r = run.attempts[static_cast<std::size_t>(*run.accepted_index)].report;
    const bool ok = *r.content_probability() > cfg.content_threshold && *r.quality_score() > cfg.quality_threshold &&
                    (*r.volume_distribution())[1] > cfg.volume_threshold;
    c.expect(ok, "accepted run below a threshold in trial " + std::to_string(trial));
  }
  c.expect(checked >= 10000, "fewer than 10000 scenarios");
  c.expect(accepted > 100 && accepted < checked - 100, "degenerate corpus: " + std::to_string(accepted) + " accepted");
  c.expect(redraws < 10 * checked, "too many unrealizable draws: " + std::to_string(redraws));

  // product absent: the product-bearing caption is never closer than the raw one
  auto absent = [&](std::mt19937_64& g) {
    ScriptedAttempt a = any(g);
    a.content[0] = a.content[1] - std::abs(cosv(g)) * 0.5;
    return a;
  };
  int absent_accepted = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = realizable(rng, 10, absent, redraws);
    if (run_scenario(s, 10, static_cast<std::uint64_t>(trial) * 16).status == RunStatus::accepted) ++absent_accepted;
  }
  c.expect(absent_accepted == 0, std::to_string(absent_accepted) + " product-absent runs accepted");
}

void morphology_oracle(Check& c) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> density(0.05, 0.95);
  const int kernels[] = {1, 3, 5, 7};
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_mask(rng, 16, 16, density(rng));
    const int k = kernels[i % 4];
    const int n = 1 + i % 3;
    const auto e = erode(m, k, n);
    const auto d = dilate(m, k, n);
    if (e != brute_erode(m, k, n)) c.expect(false, "erode mismatch on mask " + std::to_string(i));
    if (d != brute_dilate(m, k, n)) c.expect(false, "dilate mismatch on mask " + std::to_string(i));
    // duality: the complement's padding is foreground when the original's is background
    if (d != brute_erode(m.complement(), k, n, true).complement()) {
      c.expect(false, "padded duality fails on mask " + std::to_string(i));
    }
    const auto literal = erode(m.complement(), k, n).complement();
    const int margin = n * (k / 2);
    for (int y = margin; y < 16 - margin; ++y) {
      for (int x = margin; x < 16 - margin; ++x) {
        if (d.at(x, y) != literal.at(x, y)) c.expect(false, "interior duality fails on mask " + std::to_string(i));
      }
    }
    if (erode(erode(m, k, 1), k, n) != erode(m, k, n + 1)) c.expect(false, "erosion composition on mask " + std::to_string(i));
    if (dilate(dilate(m, k, 1), k, n) != dilate(m, k, n + 1)) c.expect(false, "dilation composition on mask " + std::to_string(i));
    if (!subset(e, m) || !subset(m, d)) c.expect(false, "ordering on mask " + std::to_string(i));
  }

  BinaryMask big(512, 512);
  for (int y = 64; y < 448; ++y) {
    for (int x = 32; x < 480; ++x) big.set(x, y, true);
  }
  double best = 1e9;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    const auto out = erode(big, MorphParams{}.kernel_size, 25);
    best = std::min(best, ms_since(t0));
    c.expect(out.area() > 0 && out.area() < big.area(), "512x512 erosion result");
  }
  c.expect(best < 50.0, "25 erosions on 512x512 took " + fmt(best) + " ms");
}

void softmax_arithmetic(Check& c) {
  const std::vector<double> two{0.30, 0.25};
  const auto p = scaled_softmax(two, 100.0);
  const auto o = softmax_oracle(two, 100.0);
  c.expect(std::abs(p[0] - 0.9933) <= 1e-4 && std::abs(p[1] - 0.0067) <= 1e-4, "softmax (" + fmt(p[0]) + "," + fmt(p[1]) + ")");
  c.expect(std::abs(p[0] - o[0]) < 1e-12, "softmax disagrees with oracle");

  const std::vector<double> three{0.2, 0.2, 0.2};
  const auto u = scaled_softmax(three, 100.0);
  for (double v : u) c.expect(v == 1.0 / 3.0, "uniform entry " + fmt(v));
  const auto vr = volume_from_similarities(three, AlignmentConfig{});
  c.expect(!vr.pass, "uniform distribution passes the volume gate");
  c.expect(!gate_passes(u[1], 0.34), "1/3 passes the 0.34 gate");

  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 64);
  for (int i = 0; i < 10000; ++i) {
    const int d = dim(rng);
    Embedding a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    // oracle: 100 * cos from the raw vectors
    double dot = 0, na = 0, nb = 0;
    for (int k = 0; k < d; ++k) {
      dot += a[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(k)];
      na += a[static_cast<std::size_t>(k)] * a[static_cast<std::size_t>(k)];
      nb += b[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(k)];
    }
    const double oracle = 100.0 * dot / std::sqrt(na * nb);
    const auto ua = normalized(a), ub = normalized(b);
    const double s = clip_score(ua, ub);
    if (!(s >= -100.0 && s <= 100.0)) c.expect(false, "clip_score out of [-100,100]: " + fmt(s));
    if (std::abs(s - oracle) > 1e-9) c.expect(false, "clip_score disagrees with oracle in pair " + std::to_string(i));
  }
}

void orchestrator_contract(Check& c) {
  const auto t0 = Clock::now();
  auto r = run_scenario(scenarios::fail_then_pass(9), 10, 300);
  c.expect(r.attempts.size() == 10, "fail x9,pass: " + std::to_string(r.attempts.size()) + " attempts");
  c.expect(r.accepted_index == 9, "accepted_index not 9");
  c.expect(r.status == RunStatus::accepted, "fail x9,pass not accepted");

  for (int max = 1; max <= 10; ++max) {
    r = run_scenario(scenarios::all_fail(), max, 0);
    c.expect(r.status == RunStatus::exhausted && static_cast<int>(r.attempts.size()) == max,
             "all-fail with max_attempts " + std::to_string(max));
  }

  r = run_scenario(scenarios::all_fail(), 10, 0, 42);
  c.expect(r.attempts.size() == 1 && r.attempts[0].seed == 42, "pinned seed");
  r = run_scenario(scenarios::all_pass(), 10, 0, 42);
  c.expect(r.attempts.size() == 1, "pinned seed on a pass");

  for (int k = 0; k < 10; ++k) {
    const auto s = scenarios::fail_then_pass(k);
    const auto a = json(run_scenario(s, 10, 1000 + static_cast<std::uint64_t>(k))).dump();
    const auto b = json(run_scenario(s, 10, 1000 + static_cast<std::uint64_t>(k))).dump();
    c.expect(a == b, "replay differs for fail x" + std::to_string(k));
  }
  const double ms = ms_since(t0);
  c.expect(ms < 30000.0, "runtime " + fmt(ms) + " ms");
}

void augmentation_determinism(Check& c) {
  std::vector<Image> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(load_png(fixtures() / "images" / "samples" / ("sample_" + std::to_string(i) + ".png")));
  AugmentationSpec spec;
  spec.rng_seed = 1234;
  const auto a = augment(samples, spec, false).manifest;
  const auto b = augment(samples, spec, false).manifest;
  c.expect(a.size() == 1000, std::to_string(a.size()) + " rows");
  std::array<int, 5> per{};
  for (const auto& row : a) ++per[static_cast<std::size_t>(row.source_index)];
  for (int n : per) c.expect(n == 200, "per-source count " + std::to_string(n));
  c.expect(json(a).dump() == json(b).dump(), "manifests differ across runs");
}

void evaluation_round_trip(Check& c) {
  const auto records =
      json::parse(read_file_text(fixtures() / "echo_dot_alignment_records.json")).get<std::vector<EvaluationRecord>>();
  c.expect(records.size() == 200, "fixture has " + std::to_string(records.size()) + " records");
  const auto bundle = make_blind_bundle(records, 3);
  c.expect(bundle.entries.size() == 200, "bundle size");
  std::map<std::string, HumanScore> scores;
  std::map<std::string, const EvaluationRecord*> by_image;
  for (const auto& r : records) by_image[r.image] = &r;
  for (const auto& e : bundle.entries) {
    c.expect(e.name.find(e.condition) == std::string::npos, "name leaks condition");
    const auto& r = *by_image.at(e.original_ref);
    scores[e.name] = HumanScore{r.assigned_score, r.size_score, r.success};
  }
  const auto joined = ingest_scores(bundle, scores, records);
  c.expect(joined.size() == records.size(), "joined size");
  for (const auto& j : joined) {
    const auto& r = *by_image.at(j.image);
    c.expect(j.condition == r.condition, "condition not recovered for " + j.image);
    c.expect(j.assigned_score == r.assigned_score && j.success == r.success, "scores not recovered for " + j.image);
  }

  // oracle means straight from the fixture
  for (const auto& [cond, target] : {std::pair{"naive", 4.65}, std::pair{"alignment", 6.31}}) {
    double sum = 0;
    int n = 0;
    for (const auto& r : records) {
      if (r.condition == cond && r.assigned_score) {
        sum += *r.assigned_score;
        ++n;
      }
    }
    const double oracle = sum / n;
    const double got = aggregate(joined, cond).maqs.value_or(MeanStd{}).mean;
    c.expect(std::abs(got - target) <= 0.01, std::string(cond) + " MAQS " + fmt(got));
    c.expect(std::abs(oracle - target) <= 0.01, std::string(cond) + " oracle mean " + fmt(oracle));
  }
}

void end_to_end(Check& c) {
  const auto root = temp_dir("acceptance-e2e");
  const auto scenario_path = fixtures() / "scenarios" / "fail_fail_pass.json";
  const auto scenario = json::parse(read_file_text(scenario_path)).get<StubScenario>();
  const auto bg = read_file_bytes(fixtures() / "images" / "background.png");

  WorkspaceOptions options;
  options.storage_root = root;
  options.stub_mode = true;
  auto ws = std::make_shared<Workspace>(options);
  Service service(ws);
  const int port = service.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(120, 0);

  json samples = json::array();
  for (const auto& s : sample_bytes()) samples.push_back(base64_encode(s));
  const auto profile = json::parse(read_file_text(fixtures() / "echo_dot_profile.json"));
  auto res = client.Post("/products", json{{"profile", profile}, {"samples_b64", samples}}.dump(), "application/json");
  c.expect(res && res->status == 201, "product registration over HTTP");

  res = client.Post("/generate",
                    json{{"product_id", "echo-dot"}, {"background_b64", base64_encode(bg)}, {"base_seed", 4100},
                         {"stub_scenario", scenario}}
                        .dump(),
                    "application/json");
  c.expect(res && res->status == 201, "HTTP generate");
  json http_run;
  if (res && res->status == 201) {
    const auto id = json::parse(res->body).at("run_id").get<std::string>();
    http_run = json::parse(client.Get("/runs/" + id)->body);
  }

  const auto out_png = root / "cli_out" / "result.png";
  const auto [code, out] = run_binary("--store '" + root.string() + "' generate --product echo-dot --image '" +
                                      (fixtures() / "images" / "background.png").string() + "' --stub-scenario '" +
                                      scenario_path.string() + "' --base-seed 4100 --out '" + out_png.string() + "' --json");
  c.expect(code == 0, "CLI exit code " + std::to_string(code));
  json cli_run = code == 0 ? json::parse(out) : json();
  c.expect(!http_run.is_null() && !cli_run.is_null(), "missing run record");
  if (!http_run.is_null() && !cli_run.is_null()) {
    c.expect(http_run.at("run_id") != cli_run.at("run_id"), "run ids collide");
    http_run.erase("run_id");
    cli_run.erase("run_id");
    for (const auto& item : http_run.items()) {
      c.expect(cli_run.contains(item.key()) && cli_run.at(item.key()) == item.value(), "field differs: " + item.key());
    }
    c.expect(http_run.size() == cli_run.size(), "field sets differ");
    c.expect(http_run.at("attempts").size() == 3, "expected 3 attempts");
  }

  // 100 concurrent stub runs over HTTP
  const auto bg_ref = ws->artifacts().put(bg);
  std::atomic<int> ok{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 100; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client cl("127.0.0.1", port);
      cl.set_read_timeout(120, 0);
      const auto s = scenarios::fail_then_pass(i % 4);
      auto r = cl.Post("/generate",
                       json{{"product_id", "echo-dot"}, {"background_ref", bg_ref}, {"base_seed", 10 * i}, {"stub_scenario", s}}
                           .dump(),
                       "application/json");
      if (r && r->status == 201) {
        ++ok;
      } else {
        std::cerr << "run " << i << ": " << (r ? std::to_string(r->status) + " " + r->body : httplib::to_string(r.error())) << "\n";
      }
    });
  }
  for (auto& t : threads) t.join();
  service.wait_idle();
  c.expect(ok == 100, std::to_string(ok.load()) + "/100 concurrent runs succeeded");
  c.expect(ws->run_ids().size() == 102, std::to_string(ws->run_ids().size()) + " runs recorded");
  const auto problems = ws->integrity_sweep();
  c.expect(problems.empty(), problems.empty() ? "" : "integrity: " + problems.front());
  service.stop();

  // a fresh process view of the same storage root agrees
  Workspace reopened(options);
  c.expect(reopened.run_ids().size() == 102, "reopened run count");
  c.expect(reopened.integrity_sweep().empty(), "reopened integrity sweep");
  std::filesystem::remove_all(root);
}

}  // namespace

int main() {
  report("FR golden cells", fr_golden);
  report("cascade acceptance guarantee", cascade_guarantee);
  report("morphology oracle equivalence", morphology_oracle);
  report("softmax and cosine arithmetic", softmax_arithmetic);
  report("orchestrator contract", orchestrator_contract);
  report("augmentation determinism", augmentation_determinism);
  report("evaluation round trip", evaluation_round_trip);
  report("end-to-end CLI and HTTP parity", end_to_end);
  std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria failed") << "\n";
  return g_failed == 0 ? 0 : 1;
}
