// provhunt: provenance-graph threat hunting from the command line.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <functional>
#include <iostream>

#include "provhunt/config.hpp"
#include "provhunt/cti_kb.hpp"
#include "provhunt/errors.hpp"
#include "provhunt/export.hpp"
#include "provhunt/pipeline.hpp"
#include "provhunt/reducer.hpp"

using namespace provhunt;

namespace {

/// Options that land in RunConfig. Values given on the command line
/// override the config file and the environment.
class Layered {
 public:
  template <typename T>
  CLI::Option* option(CLI::App& app, const std::string& name, T RunConfig::*member,
                      const std::string& help) {
    CLI::Option* opt = app.add_option(name, flags_.*member, help);
    overlays_.push_back([this, opt, member](RunConfig& c) {
      if (opt->count() > 0) c.*member = flags_.*member;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App& app, const std::string& name, bool RunConfig::*member,
                    const std::string& help) {
    CLI::Option* opt = app.add_flag(name, flags_.*member, help);
    overlays_.push_back([this, opt, member](RunConfig& c) {
      if (opt->count() > 0) c.*member = flags_.*member;
    });
    return opt;
  }

  RunConfig resolve(const std::string& config_file) const {
    RunConfig c;
    if (!config_file.empty()) apply_config_file(c, config_file);
    apply_env(c);
    for (const auto& overlay : overlays_) overlay(c);
    validate(c);
    return c;
  }

 private:
  RunConfig flags_;
  std::vector<std::function<void(RunConfig&)>> overlays_;
};

void detection_options(CLI::App& app, Layered& l) {
  l.option(app, "--kb", &RunConfig::benign_kb, "Benign knowledge base");
  l.option(app, "--cti", &RunConfig::cti_kb, "CTI knowledge base");
  l.option(app, "--k1", &RunConfig::k1, "Hops per direction in rare-path search");
  l.option(app, "--k2", &RunConfig::k2, "Rare paths kept per anchor");
  l.option(app, "--top-k", &RunConfig::top_k, "Retrieved items per label and query path");
  l.option(app, "--tau", &RunConfig::tau, "Similarity threshold for suspicious names");
  l.option(app, "--beam-width", &RunConfig::beam_width, "Beam width of the path search");
  l.option(app, "--token-budget", &RunConfig::token_budget, "Prompt token budget");
  l.option(app, "--tolerance", &RunConfig::tolerance, "Out-of-order slack in ns");
  l.option(app, "--backend", &RunConfig::backend, "mock, replay or http");
  l.option(app, "--session", &RunConfig::session, "Replay input, or where to record a session");
  l.option(app, "--iocs", &RunConfig::iocs_file, "Indicator list for the mock backend");
  l.option(app, "--endpoint", &RunConfig::endpoint, "Chat-completions URL");
  l.option(app, "--model", &RunConfig::model, "Model name");
  l.option(app, "--temperature", &RunConfig::temperature, "Sampling temperature");
  l.option(app, "--max-in-flight", &RunConfig::max_in_flight, "Concurrent judge requests");
  l.option(app, "--prompt-template", &RunConfig::prompt_template, "Prompt template file");
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Provenance-graph threat hunting"};
  app.require_subcommand(1);
  std::string config_file;
  bool verbose = false;
  app.add_option("-c,--config", config_file, "JSON config file");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  Layered layered;

  // build-kb
  auto* build_kb = app.add_subcommand("build-kb", "Build the benign knowledge base from benign logs");
  std::vector<std::string> benign_logs;
  std::string kb_out;
  build_kb->add_option("--benign", benign_logs, "Benign event logs")->required();
  build_kb->add_option("--out", kb_out, "Output KB file")->required();
  layered.option(*build_kb, "--embedder", &RunConfig::embedder, "hashed or trained");

  // ingest-cti
  auto* ingest_cti = app.add_subcommand("ingest-cti", "Index attack-scenario paths from CTI reports");
  std::string asg_file, cti_out, cti_embedder_kb;
  ingest_cti->add_option("--asg", asg_file, "Tab-separated source_id/sentence file")->required();
  ingest_cti->add_option("--out", cti_out, "Output CTI KB file")->required();
  ingest_cti->add_option("--kb", cti_embedder_kb, "Benign KB whose embedder to use");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Find suspicious nodes, rare paths and verdicts");
  std::string detect_out, dump_reduced;
  layered.option(*detect_cmd, "--input", &RunConfig::input, "Event log, or - for stdin");
  detection_options(*detect_cmd, layered);
  detect_cmd->add_option("--dump-reduced", dump_reduced, "Write the reduced edges here");
  detect_cmd->add_option("-o,--out", detect_out, "Report file (default stdout)");

  // reconstruct
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Cluster verdicts into an attack graph");
  std::string verdicts_file, dot_out, json_out;
  reconstruct_cmd->add_option("--verdicts", verdicts_file, "Report written by detect")->required();
  reconstruct_cmd->add_option("--out", dot_out, "DOT output")->required();
  reconstruct_cmd->add_option("--json", json_out, "JSON output");
  layered.option(*reconstruct_cmd, "--keywords", &RunConfig::keywords_file, "Keyword file");
  layered.flag(*reconstruct_cmd, "--all-clusters", &RunConfig::all_clusters,
               "Also export every other cluster");

  // report
  auto* report_cmd = app.add_subcommand("report", "Score an attack graph against ground truth");
  std::string attack_file, report_out;
  report_cmd->add_option("--attack", attack_file, "JSON written by reconstruct")->required();
  layered.option(*report_cmd, "--truth", &RunConfig::truth, "Ground-truth uuid list");
  report_cmd->add_option("-o,--out", report_out, "Report file (default stdout)");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run every stage under one directory");
  layered.option(*run_cmd, "--input", &RunConfig::input, "Event log");
  detection_options(*run_cmd, layered);
  layered.option(*run_cmd, "--keywords", &RunConfig::keywords_file, "Keyword file");
  layered.flag(*run_cmd, "--all-clusters", &RunConfig::all_clusters, "Also export every other cluster");
  layered.option(*run_cmd, "--truth", &RunConfig::truth, "Ground-truth uuid list");
  layered.option(*run_cmd, "--run-dir", &RunConfig::run_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("provhunt");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const RunConfig config = layered.resolve(config_file);

    if (*build_kb) {
      const auto kb = build_benign_kb(benign_logs, config.embedder, config.tolerance);
      save_benign_kb(kb, kb_out);
      spdlog::info("benign KB: {} names, {} behaviours -> {}", kb.stats.names().size(),
                   kb.stats.total_freq.size(), kb_out);
    } else if (*ingest_cti) {
      CtiKb cti;
      if (!cti_embedder_kb.empty()) {
        cti.embedder = load_benign_kb(cti_embedder_kb).embedder;
        cti.index = VectorIndex(cti.embedder.dim());
      }
      const auto n = ingest_asg(cti, asg_file);
      save_cti_kb(cti, cti_out);
      spdlog::info("CTI KB: {} paths -> {}", n, cti_out);
    } else if (*detect_cmd) {
      if (config.input.empty()) throw Error(ErrorCode::Config, "detect needs --input");
      if (config.benign_kb.empty()) throw Error(ErrorCode::Config, "detect needs --kb");
      const auto reduced = ingest_and_reduce(config.input, config.tolerance);
      if (!dump_reduced.empty()) write_edges(dump_reduced, reduced.edges);
      const auto graph = build_graph(reduced.edges);
      const auto kb = load_benign_kb(config.benign_kb);
      const auto cti = config.cti_kb.empty() ? CtiKb{} : load_cti_kb(config.cti_kb);
      auto backend = make_backend(config);
      const auto d = detect(graph, kb, cti, config, *backend, load_template(config));
      spdlog::info("{} nodes, {} reduced edges, {} suspicious, {} judged malicious",
                   graph.node_count(), graph.edge_count(), d.candidates.suspicious.size(),
                   std::count_if(d.verdicts.begin(), d.verdicts.end(),
                                 [](const Verdict& v) { return v.label == Label::Malicious; }));
      emit(detect_out, detection_json(d, graph, config, dump_reduced).dump(2) + "\n");
    } else if (*reconstruct_cmd) {
      const auto record = load_detection(verdicts_file);
      const auto graph = record_graph(record, config.tolerance);
      const auto r = reconstruct(graph, record, load_keyword_config(config));
      ExportAnnotations notes{record.verdicts, {r.winner.members.begin(), r.winner.members.end()}};
      write_text(dot_out, to_dot(r.attack, graph, notes));
      if (!json_out.empty())
        write_text(json_out, reconstruction_json(r, graph, record).dump(2) + "\n");
      if (config.all_clusters) {
        std::size_t i = 0;
        for (const auto& c : r.clusters) {
          if (c.members == r.winner.members) continue;
          const auto g = build_attack_graph(c.members, record.rel, graph);
          ExportAnnotations n{record.verdicts, {c.members.begin(), c.members.end()}};
          write_text(dot_out + "." + std::to_string(++i) + ".dot", to_dot(g, graph, n));
        }
      }
      spdlog::info("attack graph: {} nodes, {} edges from {} clusters", r.attack.nodes.size(),
                   r.attack.edges.size(), r.clusters.size());
    } else if (*report_cmd) {
      const auto attack = nlohmann::json::parse(read_text(attack_file));
      std::set<std::string> predicted;
      for (const auto& n : attack.at("nodes")) predicted.insert(n.at("uuid").get<std::string>());
      std::optional<std::set<std::string>> truth;
      if (!config.truth.empty()) truth = load_uuid_list(config.truth);
      auto report = run_report(predicted, truth, attack.at("provenance").at("nodes").get<std::size_t>());
      emit(report_out, report.dump(2) + "\n");
    } else if (*run_cmd) {
      const auto outcome = run_pipeline(config);
      std::cout << outcome.report.dump(2) << "\n";
    }
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
