#include "sca/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sca/parser.hpp"
#include "sca/xmile.hpp"

#include <nlohmann/json.hpp>

namespace sca {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

InputFormat sniff_format(const RunConfig& cfg) {
  if (cfg.format) return *cfg.format;
  auto ends_with = [&](std::string_view suffix) {
    const auto& p = cfg.input_path;
    return p.size() >= suffix.size() &&
           p.compare(p.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".xmile") || ends_with(".xml")) return InputFormat::Xmile;
  return InputFormat::Sdm;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string join_set(const std::set<std::string>& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& name : s) {
    if (!first) out += ", ";
    out += name;
    first = false;
  }
  return out + "}";
}

std::vector<DashedMode> modes_for(DashedChoice choice) {
  switch (choice) {
    case DashedChoice::Solid: return {DashedMode::Solid};
    case DashedChoice::Absent: return {DashedMode::Absent};
    case DashedChoice::Both: return {DashedMode::Solid, DashedMode::Absent};
  }
  return {};
}

}  // namespace

RunOutput run_sca(const RunConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InputError("--dt must be > 0");
  if (cfg.samples < 1) throw InputError("--samples must be >= 1");

  std::string text = read_file(cfg.input_path);
  ParseResult parsed = sniff_format(cfg) == InputFormat::Xmile
                           ? import_xmile(text)
                           : parse_model(text);
  if (!parsed.ok()) {
    std::string msg = "cannot parse '" + cfg.input_path + "':";
    for (const auto& e : parsed.errors) msg += "\n  " + e.to_string();
    throw InputError(msg);
  }
  const Model& model = *parsed.model;

  RunOutput out;
  for (const auto& w : parsed.warnings) {
    out.warnings.push_back(w.variable + ": " + w.message);
  }

  ExpansionResult expansion = expand_delays_ex(model);
  for (const auto& w : expansion.warnings) out.warnings.push_back(w.message);

  ClassifyOptions copts;
  copts.samples = cfg.samples;
  copts.seed = cfg.seed;
  auto classes = classify_exogenous(model, copts);

  const Model& graph_model =
      cfg.no_delay_expansion ? model : expansion.model;
  ControlGraph graph =
      mark_nonspanning(graph_model, build_graph(graph_model, classes));

  ScaReport& report = out.report;
  report.model_name = model.name;
  report.step1 = classes;

  GraphSummary& summary = report.step2_3;
  for (const auto& n : graph.nodes()) {
    ++summary.nodes;
    switch (n.kind) {
      case NodeKind::Stock:
        ++summary.stocks;
        if (n.hidden) ++summary.hidden_stocks;
        break;
      case NodeKind::Aux: ++summary.auxes; break;
      case NodeKind::Input: ++summary.inputs; break;
    }
  }
  for (const auto& e : graph.edges()) {
    ++summary.edges;
    if (e.style == EdgeStyle::NonSpanning) ++summary.nonspanning_edges;
  }
  summary.delay_expansions =
      static_cast<int>(graph_model.delay_aliases.size());

  bool has_inputs = summary.inputs > 0;
  for (DashedMode mode : modes_for(cfg.dashed)) {
    report.step4[mode] =
        has_inputs ? per_input_analysis(graph, mode)
                   : std::vector<InputAnalysis>{};
    report.step5[mode] = ModeVerdicts{stock_level_verdict(graph, mode),
                                      sufficiency_verdict(graph, mode)};
  }

  try {
    report.loops = find_loops(graph, graph_model);
  } catch (const CycleBudgetExceeded& e) {
    report.notes.push_back(std::string("loop analysis aborted: ") + e.what());
  }

  if (!has_inputs) {
    report.notes.push_back("no control inputs: model is fully endogenous");
  }
  report.notes.push_back(
      "merge rule: a projected edge is non-spanning only if every "
      "constituent pathway is range-restricted");
  report.notes.push_back("classification sampling: K=" +
                         std::to_string(cfg.samples) +
                         ", seed=" + std::to_string(cfg.seed));
  if (summary.delay_expansions > 0) {
    report.notes.push_back(
        "hidden delay stocks are initialised at the steady state of their "
        "inputs, may take negative values, and are excluded from "
        "controllable stock counts");
  }
  std::set<std::string> undetermined;
  for (const auto& c : classes) {
    if (c.verdict == ExoVerdict::Undetermined) undetermined.insert(c.exo);
  }
  if (!undetermined.empty()) {
    report.notes.push_back(
        "undetermined exogenous variables included as inputs (verdicts are "
        "conservative upper bounds): " +
        join_set(undetermined));
    out.warnings.push_back("undetermined classification for " +
                           join_set(undetermined));
  }
  if (cfg.no_delay_expansion) {
    report.notes.push_back(
        "delay expansion disabled (--no-delay-expansion): hidden delay "
        "stocks are not represented and the analysis is intentionally "
        "unsound");
  }

  if (cfg.dot_path) out.dot = to_dot(graph);
  return out;
}

namespace {

void render_verdict(std::ostringstream& os, const char* label,
                    const ControlVerdict& v, bool sufficiency) {
  os << "  " << label << ": ";
  if (v.structurally_controllable) {
    os << "structurally controllable\n";
  } else if (sufficiency) {
    os << "no conclusion\n";
  } else {
    os << "NOT structurally controllable\n";
  }
  if (!v.non_accessible.empty()) {
    os << "    non-accessible: " << join_set(v.non_accessible) << "\n";
  }
  if (v.dilation_witness) {
    os << "    dilation witness: " << join_set(*v.dilation_witness) << "\n";
  }
  for (const auto& note : v.notes) {
    if (note.rfind("mode:", 0) == 0) continue;
    os << "    note: " << note << "\n";
  }
}

}  // namespace

std::string render_text(const ScaReport& report) {
  std::ostringstream os;
  os << "Structural Control Analysis\n";
  os << "model: " << report.model_name << "\n";

  os << "\nStep 1 - exogenous classification\n";
  if (report.step1.empty()) {
    os << "  (no exogenous variables)\n";
  }
  for (const auto& c : report.step1) {
    os << "  " << c.exo << ": " << verdict_name(c.verdict)
       << "  (max mixed " << fmt(c.evidence.max_porc_term())
       << ", max d(xdot)/dz " << fmt(c.evidence.max_d_xdot_dz())
       << ", samples " << c.evidence.samples_used << ", agreement "
       << (c.evidence.agreement ? "yes" : "no") << ")\n";
  }

  const auto& s = report.step2_3;
  os << "\nStep 2/3 - abstract control graph\n";
  os << "  nodes " << s.nodes << ": stocks " << s.stocks << " (hidden "
     << s.hidden_stocks << "), aux " << s.auxes << ", inputs " << s.inputs
     << "\n";
  os << "  edges " << s.edges << " (non-spanning " << s.nonspanning_edges
     << ")\n";
  os << "  delay expansions: " << s.delay_expansions << "\n";

  for (const auto& [mode, analyses] : report.step4) {
    os << "\nStep 4 - per-input control [" << dashed_mode_name(mode) << "]\n";
    if (analyses.empty()) os << "  (no control inputs)\n";
    for (const auto& a : analyses) {
      os << "  " << a.input << ": controllable over stocks "
         << (a.single_input_controllable ? "yes" : "no")
         << ", stocks controlled " << a.controllable_stock_count
         << ", reachable nodes " << a.reachable.size() << "\n";
    }
  }

  for (const auto& [mode, verdicts] : report.step5) {
    os << "\nStep 5 - model-level verdicts [" << dashed_mode_name(mode)
       << "]\n";
    render_verdict(os, "stock-level", verdicts.stock_level, false);
    render_verdict(os, "sufficient condition (aux-as-stock)",
                   verdicts.sufficiency, true);
  }

  os << "\nLoops\n";
  if (report.loops.empty()) os << "  (none)\n";
  for (const auto& loop : report.loops) {
    os << "  ";
    for (std::size_t i = 0; i < loop.cycle.size(); ++i) {
      if (i) os << " -> ";
      os << loop.cycle[i];
    }
    os << "  [" << polarity_name(loop.polarity) << "]";
    if (loop.contains_delay) os << " (delay)";
    if (loop.contains_nonspanning) os << " (non-spanning)";
    os << "\n";
  }

  os << "\nNotes\n";
  for (const auto& note : report.notes) os << "  - " << note << "\n";
  return os.str();
}

namespace {

ordered_json verdict_to_json(const ControlVerdict& v) {
  ordered_json j;
  j["accessible"] = v.accessible;
  j["non_accessible"] = v.non_accessible;
  j["spanning"] = v.spanning;
  j["non_spanning"] = v.non_spanning;
  if (v.dilation_witness) {
    j["dilation_witness"] = *v.dilation_witness;
  } else {
    j["dilation_witness"] = nullptr;
  }
  j["structurally_controllable"] = v.structurally_controllable;
  j["theorem_applicable"] = v.theorem_applicable;
  j["notes"] = v.notes;
  return j;
}

ControlVerdict verdict_from_json(const ordered_json& j) {
  ControlVerdict v;
  v.accessible = j.at("accessible").get<std::set<std::string>>();
  v.non_accessible = j.at("non_accessible").get<std::set<std::string>>();
  v.spanning = j.at("spanning").get<std::set<std::string>>();
  v.non_spanning = j.at("non_spanning").get<std::set<std::string>>();
  if (!j.at("dilation_witness").is_null()) {
    v.dilation_witness =
        j.at("dilation_witness").get<std::set<std::string>>();
  }
  v.structurally_controllable = j.at("structurally_controllable").get<bool>();
  v.theorem_applicable = j.at("theorem_applicable").get<bool>();
  v.notes = j.at("notes").get<std::vector<std::string>>();
  return v;
}

const char* mode_key(DashedMode m) {
  return m == DashedMode::Solid ? "solid" : "absent";
}

std::string_view polarity_key(LoopFinding::Polarity p) {
  return polarity_name(p);
}

}  // namespace

std::string render_json(const ScaReport& report) {
  ordered_json j;
  j["sca_schema"] = 1;
  j["model"] = report.model_name;

  j["step1"] = ordered_json::array();
  for (const auto& c : report.step1) {
    ordered_json e;
    e["exo"] = c.exo;
    e["verdict"] = verdict_name(c.verdict);
    ordered_json ev;
    ev["d_xdot_dz"] = c.evidence.d_xdot_dz;
    ev["porc_terms"] = c.evidence.porc_terms;
    ev["samples_used"] = c.evidence.samples_used;
    ev["agreement"] = c.evidence.agreement;
    e["evidence"] = std::move(ev);
    j["step1"].push_back(std::move(e));
  }

  ordered_json g;
  g["nodes"] = report.step2_3.nodes;
  g["stocks"] = report.step2_3.stocks;
  g["hidden_stocks"] = report.step2_3.hidden_stocks;
  g["aux"] = report.step2_3.auxes;
  g["inputs"] = report.step2_3.inputs;
  g["edges"] = report.step2_3.edges;
  g["nonspanning_edges"] = report.step2_3.nonspanning_edges;
  g["delay_expansions"] = report.step2_3.delay_expansions;
  j["step2_3"] = std::move(g);

  j["step4"] = ordered_json::object();
  for (const auto& [mode, analyses] : report.step4) {
    ordered_json arr = ordered_json::array();
    for (const auto& a : analyses) {
      ordered_json e;
      e["input"] = a.input;
      e["reachable"] = a.reachable;
      e["single_input_controllable"] = a.single_input_controllable;
      e["controllable_stock_count"] = a.controllable_stock_count;
      arr.push_back(std::move(e));
    }
    j["step4"][mode_key(mode)] = std::move(arr);
  }

  j["step5"] = ordered_json::object();
  for (const auto& [mode, verdicts] : report.step5) {
    ordered_json e;
    e["stock_level"] = verdict_to_json(verdicts.stock_level);
    e["sufficiency"] = verdict_to_json(verdicts.sufficiency);
    j["step5"][mode_key(mode)] = std::move(e);
  }

  j["loops"] = ordered_json::array();
  for (const auto& loop : report.loops) {
    ordered_json e;
    e["cycle"] = loop.cycle;
    e["polarity"] = polarity_key(loop.polarity);
    e["contains_delay"] = loop.contains_delay;
    e["contains_nonspanning"] = loop.contains_nonspanning;
    j["loops"].push_back(std::move(e));
  }

  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

ScaReport parse_report_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw InputError(std::string("malformed report JSON: ") + e.what());
  }
  try {
    if (j.at("sca_schema").get<int>() != 1) {
      throw InputError("unsupported sca_schema version");
    }
    ScaReport r;
    r.model_name = j.at("model").get<std::string>();
    for (const auto& e : j.at("step1")) {
      ExoClassification c;
      c.exo = e.at("exo").get<std::string>();
      std::string v = e.at("verdict").get<std::string>();
      if (v == "ControlInput") c.verdict = ExoVerdict::ControlInput;
      else if (v == "Parameter") c.verdict = ExoVerdict::Parameter;
      else if (v == "Inert") c.verdict = ExoVerdict::Inert;
      else c.verdict = ExoVerdict::Undetermined;
      const auto& ev = e.at("evidence");
      c.evidence.exo = c.exo;
      c.evidence.d_xdot_dz =
          ev.at("d_xdot_dz").get<std::map<std::string, double>>();
      c.evidence.porc_terms =
          ev.at("porc_terms")
              .get<std::map<std::string, std::map<std::string, double>>>();
      c.evidence.samples_used = ev.at("samples_used").get<int>();
      c.evidence.agreement = ev.at("agreement").get<bool>();
      r.step1.push_back(std::move(c));
    }
    const auto& g = j.at("step2_3");
    r.step2_3.nodes = g.at("nodes").get<int>();
    r.step2_3.stocks = g.at("stocks").get<int>();
    r.step2_3.hidden_stocks = g.at("hidden_stocks").get<int>();
    r.step2_3.auxes = g.at("aux").get<int>();
    r.step2_3.inputs = g.at("inputs").get<int>();
    r.step2_3.edges = g.at("edges").get<int>();
    r.step2_3.nonspanning_edges = g.at("nonspanning_edges").get<int>();
    r.step2_3.delay_expansions = g.at("delay_expansions").get<int>();

    for (DashedMode mode : {DashedMode::Solid, DashedMode::Absent}) {
      const char* key = mode_key(mode);
      if (j.at("step4").contains(key)) {
        std::vector<InputAnalysis> analyses;
        for (const auto& e : j.at("step4").at(key)) {
          InputAnalysis a;
          a.input = e.at("input").get<std::string>();
          a.reachable = e.at("reachable").get<std::set<std::string>>();
          a.single_input_controllable =
              e.at("single_input_controllable").get<bool>();
          a.controllable_stock_count =
              e.at("controllable_stock_count").get<int>();
          analyses.push_back(std::move(a));
        }
        r.step4[mode] = std::move(analyses);
      }
      if (j.at("step5").contains(key)) {
        ModeVerdicts mv;
        mv.stock_level = verdict_from_json(j.at("step5").at(key).at("stock_level"));
        mv.sufficiency = verdict_from_json(j.at("step5").at(key).at("sufficiency"));
        r.step5[mode] = std::move(mv);
      }
    }

    for (const auto& e : j.at("loops")) {
      LoopFinding f;
      f.cycle = e.at("cycle").get<std::vector<std::string>>();
      std::string p = e.at("polarity").get<std::string>();
      if (p == "Reinforcing") f.polarity = LoopFinding::Polarity::Reinforcing;
      else if (p == "Balancing") f.polarity = LoopFinding::Polarity::Balancing;
      else f.polarity = LoopFinding::Polarity::Undetermined;
      f.contains_delay = e.at("contains_delay").get<bool>();
      f.contains_nonspanning = e.at("contains_nonspanning").get<bool>();
      r.loops.push_back(std::move(f));
    }
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("report JSON missing fields: ") + e.what());
  }
}

}  // namespace sca
