// Copyright 2026 The hyperhier Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hyperhier/commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "hyperhier/config.hpp"
#include "hyperhier/errors.hpp"
#include "hyperhier/mining.hpp"
#include "hyperhier/panoptic.hpp"
#include "hyperhier/trainer.hpp"

namespace hyperhier {

namespace fs = std::filesystem;

namespace {

// Maps library exceptions onto exit codes.
int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

fs::path prepare_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out must not be empty");
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

// Timestamps live only here, never in the payload files.
void append_run_log(const fs::path& dir, const std::string& command, int status) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ofstream log(dir / "run.log", std::ios::app);
  log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << command << " exit=" << status << '\n';
}

RunConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = path.empty() ? config_from_json(nlohmann::json::object()) : load_config(path);
  if (seed) cfg.seed = *seed;
  if (!cfg.hierarchy_path.empty() && !path.empty()) {
    fs::path hp(cfg.hierarchy_path);
    if (hp.is_relative()) cfg.hierarchy_path = (fs::path(path).parent_path() / hp).string();
  }
  return cfg;
}

Hierarchy hierarchy_for(const RunConfig& cfg) {
  return cfg.hierarchy_path.empty() ? toy_h4() : Hierarchy::load(cfg.hierarchy_path);
}

std::vector<Sample> random_batch(const std::vector<Sample>& pool, std::size_t n,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<Sample> batch(n);
  for (Sample& s : batch) s = pool[pick(rng)];
  return batch;
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_json_file(path));
}

}  // namespace

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        const RunConfig cfg = resolve_config(args.config, args.seed);
        const Hierarchy h = hierarchy_for(cfg);
        const Dataset data = generate_dataset(cfg.data, h, cfg.seed);
        const ForwardOptions fwd = forward_options(cfg, h);
        double worst = 0.0;
        nlohmann::json runs = nlohmann::json::array();
        for (std::size_t s = 0; s < cfg.gradcheck.seeds; ++s) {
          RunConfig run = cfg;
          run.seed = cfg.seed + s;
          const Model model = initial_model(run, h);
          const auto batch = random_batch(data.train, cfg.gradcheck.batch_size, run.seed);
          GradCheckOptions opts;
          opts.step = cfg.gradcheck.step;
          opts.coords = cfg.gradcheck.coords;
          opts.seed = run.seed;
          const GradCheckReport r =
              gradient_check(model, batch, h, cfg.loss, cfg.train.ce_weight, opts, fwd);
          worst = std::max(worst, r.max_rel_error);
          log << "seed " << run.seed << ": max_rel_error=" << r.max_rel_error
              << " checked=" << r.checked << " excluded=" << r.excluded.size()
              << " worst=" << parameter_name(model, r.worst_index) << '\n';
          runs.push_back({{"seed", run.seed},
                          {"max_rel_error", r.max_rel_error},
                          {"checked", r.checked},
                          {"excluded", r.excluded},
                          {"worst_parameter", parameter_name(model, r.worst_index)},
                          {"worst_analytic", r.worst_analytic},
                          {"worst_numeric", r.worst_numeric}});
        }
        const bool pass = worst < 1e-4;
        log << "gradcheck " << (pass ? "PASS" : "FAIL") << " max_rel_error=" << worst << '\n';
        if (!args.out.empty()) {
          const fs::path dir = prepare_dir(args.out);
          write_json(dir / "gradcheck.json",
                     {{"max_rel_error", worst}, {"pass", pass}, {"runs", runs},
                      {"config", to_json(cfg)}});
          append_run_log(dir, "gradcheck", pass ? kExitOk : kExitNumeric);
        }
        return pass ? kExitOk : kExitNumeric;
      },
      err);
}

int cmd_train(const TrainArgs& args, std::ostream& log, std::ostream& err) {
  fs::path dir;
  const int status = guarded(
      [&] {
        const RunConfig cfg = resolve_config(args.config, args.seed);
        const Hierarchy h = hierarchy_for(cfg);
        dir = prepare_dir(args.out);
        write_json(dir / "config.json", to_json(cfg));
        const Dataset data = generate_dataset(cfg.data, h, cfg.seed);
        const TrainResult result = train(cfg, data, h);

        std::ostringstream history;
        write_history_csv(history, result.history);
        write_text(dir / "history.csv", history.str());
        write_json(dir / "checkpoint.json", checkpoint_json(result.model, cfg, h, result.steps));
        std::ostringstream emb;
        write_embedding_dump(emb, result.model, data, h, cfg);
        write_text(dir / "embeddings.jsonl", emb.str());
        std::ostringstream proxies;
        write_proxy_dump(proxies, refresh(result.model.proxies, h, cfg.loss.c(), 0,
                                          cfg.train.weighting),
                         h);
        write_text(dir / "proxies.jsonl", proxies.str());
        const HistoryRow& last = result.history.back();
        log << "trained " << result.steps << " steps; final ce=" << last.ce
            << " hyp=" << last.hyp << " total=" << last.total << '\n';
        return kExitOk;
      },
      err);
  if (!dir.empty()) append_run_log(dir, "train", status);
  return status;
}

int cmd_eval(const EvalArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (args.checkpoint.empty()) throw UsageError("--checkpoint is required");
        const Checkpoint ck = load_checkpoint(args.checkpoint);
        const Hierarchy h = args.hierarchy.empty() ? Hierarchy::build(ck.hierarchy)
                                                   : Hierarchy::load(args.hierarchy);
        if (ck.model.proxies.leaf_tangents.size() != static_cast<std::size_t>(h.num_classes())) {
          throw UsageError("checkpoint has " +
                           std::to_string(ck.model.proxies.leaf_tangents.size()) +
                           " leaf proxies, hierarchy has " + std::to_string(h.num_classes()) +
                           " classes");
        }
        if (ck.model.encoder.feature_dim() != ck.config.data.feature_dim) {
          throw UsageError("checkpoint encoder does not match its data.feature_dim");
        }
        const std::uint64_t seed = args.seed.value_or(ck.config.seed);
        const Dataset data = generate_dataset(ck.config.data, h, seed);
        const EvalReport report = evaluate(ck.model, ck.config, data, h);
        nlohmann::json j = to_json(report, h);
        j["checkpoint_step"] = ck.step;
        j["data_seed"] = seed;
        const fs::path dir = prepare_dir(args.out);
        write_json(dir / "eval.json", j);
        append_run_log(dir, "eval", kExitOk);
        log << "leaf_accuracy=" << report.leaf_accuracy
            << " unknown_consistency=" << j["unknown_consistency"].dump()
            << " sibling_fraction=" << report.sibling_fraction
            << " mining_auroc=" << report.mining.auroc << '\n';
        return kExitOk;
      },
      err);
}

int cmd_mine(const MineArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (args.checkpoint.empty() || args.candidates.empty()) {
          throw UsageError("--checkpoint and --candidates are required");
        }
        const Checkpoint ck = load_checkpoint(args.checkpoint);
        const Hierarchy h = Hierarchy::build(ck.hierarchy);
        MiningHyper mh = ck.config.mining;
        if (!args.config.empty()) mh = load_config(args.config).mining;
        mh.validate(h);
        const Curvature c = ck.config.loss.c();
        const std::size_t n = ck.model.encoder.embed_dim();

        const nlohmann::json doc = read_json_file(args.candidates);
        if (!doc.is_object() || !doc.contains("candidates") || !doc["candidates"].is_array()) {
          throw UsageError("candidates file: expected {\"candidates\": [...]}");
        }
        std::vector<Candidate> cands;
        std::vector<Vec> probs;
        std::vector<std::size_t> with_probs;
        for (const nlohmann::json& r : doc["candidates"]) {
          if (!r.is_object() || !r.contains("id") || !r["id"].is_number_integer()) {
            throw UsageError("candidate records need an integer 'id'");
          }
          Candidate cand;
          cand.id = r["id"].get<std::int64_t>();
          if (r.contains("tangent")) {
            const Vec t = r["tangent"].get<Vec>();
            if (t.size() != n) throw UsageError("candidate tangent dimension mismatch");
            cand.point = exp_map_origin(t, c);
          } else if (r.contains("space") && r.contains("time")) {
            cand.point.space = r["space"].get<Vec>();
            cand.point.time = r["time"].get<double>();
            if (cand.point.space.size() != n) throw UsageError("candidate dimension mismatch");
            require_on_manifold(cand.point, c, "candidate");
          } else {
            throw UsageError("candidate needs 'tangent' or 'space'+'time'");
          }
          if (r.contains("probs")) {
            probs.push_back(r["probs"].get<Vec>());
            with_probs.push_back(cands.size());
          }
          cands.push_back(std::move(cand));
        }
        std::vector<bool> accepted_known(cands.size(), false);
        if (!probs.empty()) {
          const ConfidenceSplit split = known_confidence_filter(probs, mh.known_threshold);
          for (std::size_t k : split.known) accepted_known[with_probs[k]] = true;
        }
        std::vector<Candidate> pool;
        for (std::size_t i = 0; i < cands.size(); ++i) {
          if (!accepted_known[i]) pool.push_back(cands[i]);
        }
        const ProxySet ps = refresh(ck.model.proxies, h, c, 0, ck.config.train.weighting);
        const auto top = mine_unknowns(pool, ps, h, c, mh);
        const std::size_t known =
            static_cast<std::size_t>(std::count(accepted_known.begin(), accepted_known.end(), true));
        const fs::path dir = prepare_dir(args.out);
        write_json(dir / "mining.json", {{"k", mh.k},
                                         {"beta", mh.beta},
                                         {"candidates", cands.size()},
                                         {"accepted_known", known},
                                         {"results", mining_report(top, h)}});
        append_run_log(dir, "mine", kExitOk);
        log << "mined " << top.size() << " of " << pool.size() << " candidates\n";
        return kExitOk;
      },
      err);
}

int cmd_pq(const PqArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (args.pred.empty() || args.gt.empty()) throw UsageError("--pred and --gt are required");
        const auto pred = load_maps(args.pred);
        const auto gt = load_maps(args.gt);
        if (pred.size() != gt.size()) throw UsageError("pred and gt hold different image counts");
        auto score = [&](const std::vector<PanopticMap>& p) {
          PQStats total;
          for (std::size_t i = 0; i < p.size(); ++i) total += match_and_score(p[i], gt[i]);
          return total;
        };
        const PQStats open = score(pred);
        std::optional<PQStats> closed;
        if (!args.closed.empty()) {
          const auto cp = load_maps(args.closed);
          if (cp.size() != gt.size()) throw UsageError("closed and gt hold different image counts");
          closed = score(cp);
        }
        std::set<int> classes;
        for (const auto& [cls, s] : open.per_class) classes.insert(cls);
        if (closed) {
          for (const auto& [cls, s] : closed->per_class) classes.insert(cls);
        }
        classes.erase(args.unknown_class);
        const std::vector<int> known(classes.begin(), classes.end());
        const OpenWorldReport r =
            open_world_report(open, known, args.unknown_class, closed ? &*closed : nullptr);
        nlohmann::json per_class = nlohmann::json::object();
        for (const auto& [cls, s] : open.per_class) {
          per_class[std::to_string(cls)] = {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn},
                                            {"iou_sum", s.iou_sum}, {"pq", s.pq()},
                                            {"rq", s.rq()}, {"sq", s.sq()}};
        }
        nlohmann::json j = to_json(r);
        j["per_class"] = per_class;
        j["unknown_class"] = args.unknown_class;
        const fs::path dir = prepare_dir(args.out);
        write_json(dir / "pq.json", j);
        append_run_log(dir, "pq", kExitOk);
        log << "known PQ=" << r.known.pq << " RQ=" << r.known.rq << " SQ=" << r.known.sq
            << "; unknown PQ=" << r.unknown.pq << '\n';
        return kExitOk;
      },
      err);
}

int run_cli(const std::vector<std::string>& argv, std::ostream& log, std::ostream& err) {
  CLI::App app{"Hyperbolic hierarchical proxy learning toolkit", "hyperhier"};
  app.require_subcommand(1);

  GradcheckArgs gc;
  std::uint64_t gc_seed = 0;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the gradients");
  gc_cmd->add_option("--config", gc.config, "Run config (JSON)");
  CLI::Option* gc_seed_opt = gc_cmd->add_option("--seed", gc_seed, "Override the config seed");
  gc_cmd->add_option("--out", gc.out, "Directory for gradcheck.json");

  TrainArgs tr;
  std::uint64_t tr_seed = 0;
  CLI::App* tr_cmd = app.add_subcommand("train", "Train on synthetic taxonomic data");
  tr_cmd->add_option("--config", tr.config, "Run config (JSON)");
  CLI::Option* tr_seed_opt = tr_cmd->add_option("--seed", tr_seed, "Override the config seed");
  tr_cmd->add_option("--out", tr.out, "Output directory")->capture_default_str();

  EvalArgs ev;
  std::uint64_t ev_seed = 0;
  CLI::App* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint.json")->required();
  CLI::Option* ev_seed_opt = ev_cmd->add_option("--seed", ev_seed, "Data seed");
  ev_cmd->add_option("--hierarchy", ev.hierarchy, "Hierarchy file overriding the checkpoint's");
  ev_cmd->add_option("--out", ev.out, "Output directory")->capture_default_str();

  MineArgs mi;
  CLI::App* mi_cmd = app.add_subcommand("mine", "Score and select unknown candidates");
  mi_cmd->add_option("--checkpoint", mi.checkpoint, "checkpoint.json")->required();
  mi_cmd->add_option("--candidates", mi.candidates, "Candidate embeddings (JSON)")->required();
  mi_cmd->add_option("--config", mi.config, "Config whose mining section overrides");
  mi_cmd->add_option("--out", mi.out, "Output directory")->capture_default_str();

  PqArgs pq;
  CLI::App* pq_cmd = app.add_subcommand("pq", "Panoptic quality of predicted maps");
  pq_cmd->add_option("--pred", pq.pred, "Predicted maps (RLE JSON)")->required();
  pq_cmd->add_option("--gt", pq.gt, "Ground-truth maps (RLE JSON)")->required();
  pq_cmd->add_option("--closed", pq.closed, "Closed-world predictions for delta PQ");
  pq_cmd->add_option("--unknown-class", pq.unknown_class, "Class id shared by unknowns");
  pq_cmd->add_option("--out", pq.out, "Output directory")->capture_default_str();

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    log << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    log << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (gc_cmd->parsed()) {
    if (gc_seed_opt->count() > 0) gc.seed = gc_seed;
    return cmd_gradcheck(gc, log, err);
  }
  if (tr_cmd->parsed()) {
    if (tr_seed_opt->count() > 0) tr.seed = tr_seed;
    return cmd_train(tr, log, err);
  }
  if (ev_cmd->parsed()) {
    if (ev_seed_opt->count() > 0) ev.seed = ev_seed;
    return cmd_eval(ev, log, err);
  }
  if (mi_cmd->parsed()) return cmd_mine(mi, log, err);
  return cmd_pq(pq, log, err);
}

}  // namespace hyperhier
