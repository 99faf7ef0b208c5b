// provql: import audit logs, run queries, explore interactively, generate
// synthetic scenarios.
//
// Exit codes: 0 success, 2 io/config error, 3 parse/semantic error,
// 4 execution error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "provql/algebra.hpp"
#include "provql/engine.hpp"
#include "provql/importer.hpp"
#include "provql/parser.hpp"
#include "provql/scenario.hpp"
#include "provql/store.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kIoError = 2;
constexpr int kParseError = 3;
constexpr int kExecError = 4;

struct Options {
  std::string store_path;
  std::string variant = "file";
  std::string format = "dot";
  provql::EngineConfig engine;
  std::string config_file;
};

int fail_io(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return kIoError;
}

// Config files carry the same keys as the long options. JSON is detected by
// content or extension; otherwise a flat key = value TOML subset is read.
bool load_config(const std::string& path, Options& o, std::string& err) {
  std::ifstream in(path);
  if (!in) {
    err = "cannot open config " + path;
    return false;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  auto apply = [&](const std::string& key, const nlohmann::json& v) -> bool {
    auto positive = [&](auto x) { return x > 0; };
    if (key == "store") {
      o.store_path = v.get<std::string>();
    } else if (key == "variant") {
      o.variant = v.get<std::string>();
    } else if (key == "format") {
      o.format = v.get<std::string>();
    } else if (key == "merge_gap_ns") {
      auto x = v.get<std::int64_t>();
      if (!positive(x)) return false;
      o.engine.merge_gap_ns = x;
    } else if (key == "epsilon") {
      auto x = v.get<double>();
      if (!positive(x)) return false;
      o.engine.epsilon = x;
    } else if (key == "max_iters") {
      auto x = v.get<int>();
      if (!positive(x)) return false;
      o.engine.max_iters = x;
    } else if (key == "seed") {
      o.engine.seed = v.get<std::uint64_t>();
    } else if (key == "max_edges") {
      auto x = v.get<std::int64_t>();
      if (!positive(x)) return false;
      o.engine.limits.max_edges = static_cast<std::uint64_t>(x);
    } else if (key == "max_nodes") {
      auto x = v.get<std::int64_t>();
      if (!positive(x)) return false;
      o.engine.limits.max_nodes = static_cast<std::uint64_t>(x);
    } else if (key == "max_depth") {
      auto x = v.get<int>();
      if (!positive(x)) return false;
      o.engine.limits.max_depth = x;
    } else if (key == "emit_prenorm_weights") {
      o.engine.emit_prenorm_weights = v.get<bool>();
    } else if (key == "parallel_kernels") {
      o.engine.parallel_kernels = v.get<bool>();
    } else if (key == "parallel_subqueries") {
      o.engine.parallel_subqueries = v.get<bool>();
    } else {
      err = "unknown config key: " + key;
      return false;
    }
    return true;
  };

  try {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    bool is_json = path.size() > 5 && path.substr(path.size() - 5) == ".json";
    if (first != std::string::npos && text[first] == '{') is_json = true;
    if (is_json) {
      auto j = nlohmann::json::parse(text);
      for (const auto& [k, v] : j.items())
        if (!apply(k, v)) {
          if (err.empty()) err = "config value for " + k + " must be positive";
          return false;
        }
      return true;
    }
    // TOML subset: flat `key = value` lines, # comments.
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty()) continue;
      nlohmann::json v;
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
        v = val.substr(1, val.size() - 2);
      else if (val == "true" || val == "false")
        v = (val == "true");
      else if (val.find('.') != std::string::npos)
        v = std::stod(val);
      else
        v = std::stoll(val);
      if (!apply(key, v)) {
        if (err.empty()) err = "config value for " + key + " must be positive";
        return false;
      }
    }
    return true;
  } catch (const std::exception& ex) {
    err = std::string("bad config: ") + ex.what();
    return false;
  }
}

std::unique_ptr<provql::EventStore> open_store_checked(const Options& o, bool import_on_memory,
                                                       int& rc) {
  rc = kOk;
  try {
    auto store = provql::open_store(o.store_path, o.variant);
    if (o.variant == "memory" && import_on_memory) {
      // Memory variant: the store path is a JSONL log imported on the fly.
      auto result = provql::import_file(o.store_path, *store);
      if (!result.ok) {
        std::cerr << "error: " << result.error << "\n";
        rc = kIoError;
        return nullptr;
      }
    }
    return store;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    rc = kIoError;
    return nullptr;
  }
}

void print_import_stats(const provql::ImportResult& r, std::ostream& os) {
  os << "accepted " << r.stats.store.accepted << ", rejected " << r.stats.store.rejected
     << ", new entities " << r.stats.store.new_entities << ", merged entities "
     << r.stats.store.merged_entities << ", auto-created " << r.stats.auto_created_entities
     << ", duplicate ids " << r.stats.duplicate_ids << ", parse errors " << r.stats.parse_errors
     << "\n";
  for (const auto& e : r.stats.errors)
    os << "  line " << e.line_no << ": " << e.reason << "\n";
}

int run_query_text(const std::string& text, provql::EventStore& store, const Options& o,
                   const std::string& out_path, bool print_report_json) {
  auto parsed = provql::parse_query(text);
  if (auto* err = std::get_if<provql::ParseError>(&parsed)) {
    std::cerr << err->to_string() << "\n";
    return kParseError;
  }
  auto& ast = std::get<provql::ast::QueryAst>(parsed);
  auto sem = provql::validate_ast(ast);
  if (!sem.empty()) {
    for (const auto& e : sem) std::cerr << "semantic error: " << e.message << "\n";
    return kParseError;
  }
  try {
    auto result = provql::execute(ast, store, o.engine);
    std::string exported = provql::export_graph(result.graph, store, o.format);
    if (out_path.empty() || out_path == "-") {
      std::cout << exported;
    } else {
      std::ofstream out(out_path);
      out << exported;
      if (!out) return fail_io("cannot write " + out_path);
    }
    std::cerr << result.report.summary();
    if (print_report_json) std::cerr << result.report.to_json() << "\n";
    return kOk;
  } catch (const provql::EngineError& ex) {
    std::cerr << "execution error: " << ex.message << "\n";
    return kExecError;
  } catch (const std::exception& ex) {
    std::cerr << "execution error: " << ex.what() << "\n";
    return kExecError;
  }
}

int run_repl(provql::EventStore& store, const Options& o) {
  std::map<std::string, provql::ProvGraph> session;
  std::cout << "provql repl; finish statements with ';', commands: :export <name> <file>, "
               ":stats <name>, :quit\n";
  std::string buffer;
  std::string line;
  while (true) {
    std::cout << (buffer.empty() ? "provql> " : "   ...> ") << std::flush;
    if (!std::getline(std::cin, line)) break;
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (buffer.empty() && !trimmed.empty() && trimmed[0] == ':') {
      std::istringstream cmd(trimmed);
      std::string op, name, file;
      cmd >> op >> name >> file;
      if (op == ":quit") break;
      if (op == ":stats") {
        auto it = session.find(name);
        if (it == session.end()) {
          std::cerr << "unknown graph: " << name << "\n";
          continue;
        }
        std::cout << name << ": " << it->second.edges.size() << " edges, "
                  << it->second.nodes.size() << " nodes"
                  << (it->second.truncated ? " (truncated)" : "") << "\n";
        continue;
      }
      if (op == ":export") {
        auto it = session.find(name);
        if (it == session.end()) {
          std::cerr << "unknown graph: " << name << "\n";
          continue;
        }
        std::ofstream out(file);
        out << provql::export_graph(it->second, store, o.format);
        if (!out)
          std::cerr << "cannot write " << file << "\n";
        else
          std::cout << "wrote " << file << "\n";
        continue;
      }
      std::cerr << "unknown command: " << op << "\n";
      continue;
    }
    buffer += line;
    buffer += "\n";
    auto semi = buffer.find(';');
    if (semi == std::string::npos) continue;
    std::string stmt = buffer.substr(0, semi);
    buffer.clear();
    if (stmt.find_first_not_of(" \t\r\n") == std::string::npos) continue;

    auto parsed = provql::parse_query(stmt);
    if (auto* err = std::get_if<provql::ParseError>(&parsed)) {
      std::cerr << err->to_string() << "\n";
      continue;
    }
    auto& ast = std::get<provql::ast::QueryAst>(parsed);
    auto sem = provql::validate_ast(ast);
    if (!sem.empty()) {
      for (const auto& e : sem) std::cerr << "semantic error: " << e.message << "\n";
      continue;
    }
    try {
      auto result = provql::execute(ast, store, o.engine);
      for (auto& [name, g] : result.named_graphs) session[name] = std::move(g);
      session["last"] = result.graph;
      std::cout << result.report.summary();
    } catch (const provql::EngineError& ex) {
      std::cerr << "execution error: " << ex.message << "\n";
    } catch (const std::exception& ex) {
      std::cerr << "execution error: " << ex.what() << "\n";
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"provenance query system"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opts;
  if (const char* env = std::getenv("PROVQL_STORE")) opts.store_path = env;

  app.add_option("--config", opts.config_file, "config file (TOML subset or JSON)");
  app.add_option("--store", opts.store_path, "store path (or JSONL log for --variant memory)");
  app.add_option("--variant", opts.variant, "store variant: memory | file")
      ->check(CLI::IsMember({"memory", "file"}));
  app.add_option("--format", opts.format, "output format: dot | json | csv")
      ->check(CLI::IsMember({"dot", "json", "csv"}));
  app.add_option("--merge-gap-ns", opts.engine.merge_gap_ns, "edge-merge gap threshold (ns)")
      ->check(CLI::PositiveNumber);
  app.add_option("--epsilon", opts.engine.epsilon, "propagation convergence threshold")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-iters", opts.engine.max_iters, "propagation iteration cap")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.engine.seed, "random seed");
  app.add_option("--max-edges", opts.engine.limits.max_edges, "traversal edge limit")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-nodes", opts.engine.limits.max_nodes, "traversal node limit")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-depth", opts.engine.limits.max_depth, "traversal depth limit (0 = off)");
  app.add_flag("--emit-prenorm-weights", opts.engine.emit_prenorm_weights,
               "include pre-normalization weights in the report");
  app.add_flag("!--no-parallel", opts.engine.parallel_kernels, "disable OpenMP kernels");
  app.add_flag("--parallel-subqueries", opts.engine.parallel_subqueries,
               "run independent sub-queries concurrently");

  std::string log_path, query_file, query_text, out_path, scenario = "password_crack";
  std::uint64_t scale = 10000, gen_seed = 1;
  bool report_json = false;

  auto* cmd_import = app.add_subcommand("import", "import a JSONL audit log into a store");
  cmd_import->add_option("log", log_path, "JSONL log file")->required();

  auto* cmd_query = app.add_subcommand("query", "execute a query against a store");
  cmd_query->add_option("query_file", query_file, "file containing the query");
  cmd_query->add_option("-e,--execute", query_text, "query text inline");
  cmd_query->add_option("-o,--out", out_path, "output file (default stdout)");
  cmd_query->add_flag("--report-json", report_json, "print the full execution report as JSON");

  auto* cmd_repl = app.add_subcommand("repl", "interactive session against a store");

  auto* cmd_generate = app.add_subcommand("generate", "generate a synthetic attack scenario");
  cmd_generate->add_option("--scenario", scenario, "password_crack | data_leakage | vpn_filter")
      ->check(CLI::IsMember(provql::scenario_names()));
  cmd_generate->add_option("--scale", scale, "approximate background event count");
  cmd_generate->add_option("--gen-seed", gen_seed, "scenario seed (alias for --seed)");
  cmd_generate->add_option("-o,--out", out_path, "output log path")->required();

  CLI11_PARSE(app, argc, argv);

  if (!opts.config_file.empty()) {
    std::string err;
    Options from_config = opts;
    if (!load_config(opts.config_file, from_config, err)) return fail_io(err);
    // Explicit command-line options win over the config file.
    auto keep_if_set = [&](const char* flag, auto member) {
      if (app.count(flag)) from_config.*member = opts.*member;
    };
    keep_if_set("--store", &Options::store_path);
    keep_if_set("--variant", &Options::variant);
    keep_if_set("--format", &Options::format);
    if (!app.count("--merge-gap-ns")) opts.engine.merge_gap_ns = from_config.engine.merge_gap_ns;
    if (!app.count("--epsilon")) opts.engine.epsilon = from_config.engine.epsilon;
    if (!app.count("--max-iters")) opts.engine.max_iters = from_config.engine.max_iters;
    if (!app.count("--seed")) opts.engine.seed = from_config.engine.seed;
    if (!app.count("--max-edges")) opts.engine.limits.max_edges = from_config.engine.limits.max_edges;
    if (!app.count("--max-nodes")) opts.engine.limits.max_nodes = from_config.engine.limits.max_nodes;
    if (!app.count("--max-depth")) opts.engine.limits.max_depth = from_config.engine.limits.max_depth;
    if (!app.count("--store")) opts.store_path = from_config.store_path;
    if (!app.count("--variant")) opts.variant = from_config.variant;
    if (!app.count("--format")) opts.format = from_config.format;
  }

  if (cmd_generate->parsed()) {
    try {
      std::uint64_t seed = cmd_generate->count("--gen-seed") ? gen_seed : opts.engine.seed;
      auto out = provql::generate_scenario(scenario, scale, seed);
      std::ofstream log(out_path);
      log << out.jsonl;
      std::ofstream manifest(out_path + ".manifest.json");
      manifest << out.manifest_json << "\n";
      std::ofstream query(out_path + ".query");
      query << out.query;
      std::ofstream wquery(out_path + ".wquery");
      wquery << out.weight_query;
      if (!log || !manifest || !query || !wquery) return fail_io("cannot write outputs");
      std::cout << "wrote " << out_path << " (+.manifest.json, .query, .wquery)\n";
      return kOk;
    } catch (const std::exception& ex) {
      return fail_io(ex.what());
    }
  }

  if (opts.store_path.empty())
    return fail_io("no store path (use --store or PROVQL_STORE)");

  if (cmd_import->parsed()) {
    if (!std::filesystem::exists(log_path)) return fail_io("no such file: " + log_path);
    if (opts.variant == "memory") {
      // Validation-only pass; a memory store does not outlive the process.
      provql::MemoryStore store;
      auto r = provql::import_file(log_path, store);
      print_import_stats(r, std::cout);
      return r.ok ? kOk : kIoError;
    }
    int rc = kOk;
    auto store = open_store_checked(opts, false, rc);
    if (!store) return rc;
    auto r = provql::import_file(log_path, *store);
    print_import_stats(r, std::cout);
    if (!r.ok) {
      std::cerr << "error: " << r.error << "\n";
      return kIoError;
    }
    return kOk;
  }

  if (cmd_query->parsed()) {
    if (query_file.empty() == query_text.empty())
      return fail_io("provide exactly one of <query_file> or -e <text>");
    std::string text = query_text;
    if (!query_file.empty()) {
      std::ifstream in(query_file);
      if (!in) return fail_io("cannot open " + query_file);
      std::stringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    }
    int rc = kOk;
    auto store = open_store_checked(opts, true, rc);
    if (!store) return rc;
    return run_query_text(text, *store, opts, out_path, report_json);
  }

  if (cmd_repl->parsed()) {
    int rc = kOk;
    auto store = open_store_checked(opts, true, rc);
    if (!store) return rc;
    return run_repl(*store, opts);
  }

  return kOk;
}
