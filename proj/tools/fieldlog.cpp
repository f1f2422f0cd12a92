#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"
#include "fieldlog/http_api.hpp"
#include "fieldlog/ingest.hpp"
#include "fieldlog/record_io.hpp"
#include "fieldlog/segmentation.hpp"
#include "fieldlog/service.hpp"
#include "fieldlog/simulator.hpp"

namespace {

using namespace fieldlog;

struct SimArgs {
  std::string preset;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string truth;
  std::string write_scenario;
};

sim::Scenario load_preset(const std::string& name, std::optional<std::uint64_t> seed) {
  if (name == "acceptance") return seed ? sim::acceptance_scenario(*seed) : sim::acceptance_scenario();
  if (name == "single-field") return seed ? sim::single_field_scenario(*seed) : sim::single_field_scenario();
  for (const auto c : {sim::Correction::parked_machinery, sim::Correction::disrupted_work,
                       sim::Correction::field_transitions, sim::Correction::stray_implements}) {
    if (name == sim::to_string(c)) return seed ? sim::correction_scenario(c, *seed) : sim::correction_scenario(c);
  }
  throw Error(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
}

int run_sim(const SimArgs& a) {
  sim::Scenario scenario = a.scenario.empty() ? load_preset(a.preset, a.seed) : sim::load_scenario_file(a.scenario);
  if (!a.scenario.empty() && a.seed) scenario.seed = *a.seed;
  const auto emitted = sim::emit_scenario(scenario);

  std::string telemetry;
  for (const auto& line : emitted.lines) {
    telemetry += line;
    telemetry += '\n';
  }
  io::write_file(a.out, telemetry);
  if (!a.truth.empty()) io::write_file(a.truth, sim::truth_to_csv(emitted.truth));
  if (!a.write_scenario.empty()) io::write_file(a.write_scenario, sim::to_json(scenario).dump(2) + "\n");
  std::cerr << emitted.lines.size() << " reports, " << emitted.truth.size() << " truth records\n";
  return 0;
}

struct PipelineArgs {
  std::string registry;
  std::string in;
  std::string out_records;
  std::string out_geojson;
  std::vector<std::string> disable;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  const Registry registry = load_registry_file(a.registry);
  segmentation::Corrections corrections;
  for (const auto& d : a.disable) {
    if (d == "parked_machinery") corrections.parked_machinery = false;
    else if (d == "disrupted_work") corrections.disrupted_work = false;
    else if (d == "field_transitions") corrections.field_transitions = false;
    else if (d == "stray_implements") corrections.stray_implements = false;
    else throw Error(ErrorCode::invalid_argument, "unknown correction '" + d + "'");
  }

  auto batch = service::parse_batch(io::read_file(a.in), registry);
  const auto reports = service::dedup_first_wins(std::move(batch.reports));
  const auto result = segmentation::run_pipeline(registry, reports, corrections);

  io::write_file(a.out_records, io::records_to_csv(result.records));
  if (!a.out_geojson.empty()) io::write_file(a.out_geojson, io::records_to_geojson(result.records, &registry).dump());

  std::cerr << reports.size() << " reports, " << batch.rejects.size() << " rejected lines, " << result.records.size()
            << " records\n";
  for (const auto& r : batch.rejects) std::cerr << "  line " << r.line << ": " << r.reason << "\n";
  return 0;
}

struct ServeArgs {
  std::string registry;
  std::string data_dir;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string web_root;
  double debounce_s = 10.0;
};

int run_serve(const ServeArgs& a) {
  // Handle termination signals synchronously on the main thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Options options;
  options.data_dir = a.data_dir;
  if (a.debounce_s > 0) {
    options.debounce = Millis{static_cast<std::int64_t>(a.debounce_s * 1000.0)};
  } else {
    options.debounce.reset();
  }
  service::Service svc(load_registry_file(a.registry), options);

  http::ServerOptions server_options;
  server_options.host = a.host;
  server_options.port = a.port;
  if (!a.web_root.empty()) server_options.web_root = a.web_root;
  http::Server server(svc, server_options);
  const int port = server.start();
  std::cerr << "listening on http://" << a.host << ":" << port << " (" << svc.logged_reports()
            << " logged reports, revision " << svc.revision() << ")\n";

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  return 0;
}

struct CompareArgs {
  std::string auto_csv;
  std::string manual_csv;
  std::string out;
};

int run_compare(const CompareArgs& a) {
  const auto records = io::records_from_csv(io::read_file(a.auto_csv));
  const auto manual = io::manual_from_csv(io::read_file(a.manual_csv));
  const auto report = segmentation::compare_records(records, manual);
  const auto csv = io::discrepancies_to_csv(report);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    io::write_file(a.out, csv);
  }
  std::cerr << report.entries.size() << " discrepancies\n";
  return 0;
}

struct NmeaArgs {
  std::string machine;
  std::string in;
  std::string out;
};

int run_nmea(const NmeaArgs& a) {
  const auto parsed = ingest::parse_nmea_stream(a.machine, io::read_file(a.in));
  std::string lines;
  for (const auto& f : parsed.fixes) {
    lines += ingest::serialize_gateway_report({f, {}});
    lines += '\n';
  }
  if (a.out.empty()) {
    std::cout << lines;
  } else {
    io::write_file(a.out, lines);
  }
  std::cerr << parsed.fixes.size() << " fixes, " << parsed.skipped << " skipped sentences\n";
  for (const auto& [reason, n] : parsed.rejected) std::cerr << "  " << reason << ": " << n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic farm work records from GNSS and BLE telemetry"};
  app.require_subcommand(1);

  SimArgs sim_args;
  auto* sim_cmd = app.add_subcommand("sim", "Generate telemetry and truth from a scenario");
  auto* preset_opt = sim_cmd->add_option("--preset", sim_args.preset,
                                         "acceptance, single-field, or a correction name (e.g. parked_machinery)");
  auto* scenario_opt = sim_cmd->add_option("--scenario", sim_args.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
  preset_opt->excludes(scenario_opt);
  sim_cmd->add_option("--seed", sim_args.seed, "Override the scenario seed");
  sim_cmd->add_option("--out", sim_args.out, "Telemetry output (wire-format lines)")->required();
  sim_cmd->add_option("--truth", sim_args.truth, "Truth records CSV");
  sim_cmd->add_option("--write-scenario", sim_args.write_scenario, "Write the scenario JSON (usable as --registry)");
  sim_cmd->callback([&] {
    if (sim_args.preset.empty() && sim_args.scenario.empty()) throw CLI::ValidationError("one of --preset/--scenario is required");
  });

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Batch processing");
  pipeline_cmd->require_subcommand(1);
  PipelineArgs pipeline_args;
  auto* run_cmd = pipeline_cmd->add_subcommand("run", "Telemetry file to work records");
  run_cmd->add_option("--registry", pipeline_args.registry, "Registry JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--in", pipeline_args.in, "Telemetry (wire-format lines)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out-records", pipeline_args.out_records, "Records CSV")->required();
  run_cmd->add_option("--out-geojson", pipeline_args.out_geojson, "Records GeoJSON");
  run_cmd->add_option("--disable", pipeline_args.disable, "Turn off a correction (repeatable)");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the ingestion and query service");
  serve_cmd->add_option("--registry", serve_args.registry, "Registry JSON")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--data-dir", serve_args.data_dir, "Event log directory")->envname("FIELDLOG_DATA_DIR")->required();
  serve_cmd->add_option("--port", serve_args.port, "Listen port")->envname("FIELDLOG_PORT")->capture_default_str();
  serve_cmd->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--web-root", serve_args.web_root, "Static UI bundle served under /app/");
  serve_cmd->add_option("--debounce-s", serve_args.debounce_s, "Recompute delay after ingest; 0 disables")
      ->capture_default_str();

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand("compare", "Compare automatic records with manual entries");
  compare_cmd->add_option("--auto", compare_args.auto_csv, "Records CSV")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--manual", compare_args.manual_csv, "Manual CSV (field_id,work_type,date)")
      ->required()
      ->check(CLI::ExistingFile);
  compare_cmd->add_option("--out", compare_args.out, "Discrepancy CSV (default stdout)");

  NmeaArgs nmea_args;
  auto* nmea_cmd = app.add_subcommand("nmea", "Convert NMEA RMC sentences to wire-format lines");
  nmea_cmd->add_option("--machine", nmea_args.machine, "Machine id")->required();
  nmea_cmd->add_option("--in", nmea_args.in, "NMEA text")->required()->check(CLI::ExistingFile);
  nmea_cmd->add_option("--out", nmea_args.out, "Output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return run_sim(sim_args);
    if (run_cmd->parsed()) return run_pipeline_cmd(pipeline_args);
    if (serve_cmd->parsed()) return run_serve(serve_args);
    if (compare_cmd->parsed()) return run_compare(compare_args);
    if (nmea_cmd->parsed()) return run_nmea(nmea_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
