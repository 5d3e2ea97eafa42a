#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sca/controllability.hpp"

namespace sca {

struct GraphSummary {
  int nodes = 0;
  int stocks = 0;
  int hidden_stocks = 0;
  int auxes = 0;
  int inputs = 0;
  int edges = 0;
  int nonspanning_edges = 0;
  int delay_expansions = 0;

  bool operator==(const GraphSummary&) const = default;
};

struct ModeVerdicts {
  ControlVerdict stock_level;
  ControlVerdict sufficiency;

  bool operator==(const ModeVerdicts&) const = default;
};

struct ScaReport {
  std::string model_name;
  std::vector<ExoClassification> step1;
  GraphSummary step2_3;
  std::map<DashedMode, std::vector<InputAnalysis>> step4;
  std::map<DashedMode, ModeVerdicts> step5;
  std::vector<LoopFinding> loops;
  std::vector<std::string> notes;

  bool operator==(const ScaReport&) const = default;
};

enum class InputFormat { Sdm, Xmile };
enum class DashedChoice { Both, Solid, Absent };
enum class ReportFormat { Text, Json };

struct RunConfig {
  std::string input_path;
  std::optional<InputFormat> format;  // sniffed from extension when unset
  DashedChoice dashed = DashedChoice::Both;
  double dt = 0.25;
  int samples = 16;
  std::uint64_t seed = 42;
  std::optional<std::string> dot_path;
  ReportFormat report_format = ReportFormat::Text;
  bool no_delay_expansion = false;
};

// Raised for unreadable/unparseable/invalid inputs: CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(std::string message)
      : std::runtime_error(std::move(message)) {}
};

struct RunOutput {
  ScaReport report;
  std::optional<std::string> dot;      // when cfg.dot_path was set
  std::vector<std::string> warnings;   // for stderr
};

// Runs the five-step workflow end to end:
// parse -> validate -> expand -> classify -> graph -> verdicts -> loops.
RunOutput run_sca(const RunConfig& cfg);

std::string render_text(const ScaReport& report);

// Stable key order, "sca_schema": 1, shortest-round-trip numbers.
std::string render_json(const ScaReport& report);

// Inverse of render_json; throws InputError on malformed report JSON.
ScaReport parse_report_json(const std::string& json_text);

}  // namespace sca
