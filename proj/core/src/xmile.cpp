#include "sca/xmile.hpp"

#include <algorithm>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace sca {

namespace {

namespace pt = boost::property_tree;

std::string normalize_name(std::string name) {
  for (char& c : name) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') c = '_';
  }
  return name;
}

struct Importer {
  ParseResult result;
  Model model;
  std::set<std::string> declared;

  void error(const std::string& path, const std::string& expected,
             const std::string& found) {
    result.errors.push_back({{1, 1, 1}, expected + " at " + path, found});
  }

  void unsupported(const std::string& path, const std::string& feature) {
    result.errors.push_back(
        {{1, 1, 1}, "a supported XMILE subset element at " + path,
         "UnsupportedFeature(" + feature + ")"});
  }

  bool declare(const std::string& name, const std::string& path) {
    if (!declared.insert(name).second) {
      error(path, "a unique name after normalization", name);
      return false;
    }
    return true;
  }

  std::optional<std::string> name_attr(const pt::ptree& node,
                                       const std::string& path) {
    auto name = node.get_optional<std::string>("<xmlattr>.name");
    if (!name) {
      error(path, "a name attribute", "none");
      return std::nullopt;
    }
    std::string normalized = normalize_name(*name);
    if (!is_identifier(normalized)) {
      error(path, "a valid identifier after normalization", *name);
      return std::nullopt;
    }
    return normalized;
  }

  ExprPtr parse_eqn(const std::string& text, const std::string& path) {
    auto parsed = parse_expression(text);
    if (!parsed.ok()) {
      error(path + "/eqn", parsed.error->expected, parsed.error->found);
      return nullptr;
    }
    return parsed.expr;
  }

  // A bare numeric equation makes the variable an exogenous constant.
  std::optional<double> as_constant(const ExprPtr& e) {
    if (!e) return std::nullopt;
    if (const auto* n = std::get_if<NumberNode>(&e->node)) return n->value;
    if (const auto* g = std::get_if<NegNode>(&e->node)) {
      if (const auto* n = std::get_if<NumberNode>(&g->operand->node)) {
        return -n->value;
      }
    }
    return std::nullopt;
  }

  std::optional<Table> parse_gf(const pt::ptree& gf, const std::string& name,
                                const std::string& path) {
    auto type = gf.get_optional<std::string>("<xmlattr>.type");
    if (type && *type != "continuous") {
      unsupported(path + "/gf", *type + " gf");
      return std::nullopt;
    }
    auto ypts_text = gf.get_optional<std::string>("ypts");
    if (!ypts_text) {
      unsupported(path + "/gf", "gf without ypts");
      return std::nullopt;
    }
    std::vector<double> ys;
    std::stringstream ss(*ypts_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        ys.push_back(std::stod(item));
      } catch (const std::exception&) {
        error(path + "/gf/ypts", "a number", item);
        return std::nullopt;
      }
    }
    std::vector<double> xs;
    if (auto xpts_text = gf.get_optional<std::string>("xpts")) {
      std::stringstream xss(*xpts_text);
      while (std::getline(xss, item, ',')) {
        try {
          xs.push_back(std::stod(item));
        } catch (const std::exception&) {
          error(path + "/gf/xpts", "a number", item);
          return std::nullopt;
        }
      }
    } else {
      auto xmin = gf.get_optional<double>("xscale.<xmlattr>.min");
      auto xmax = gf.get_optional<double>("xscale.<xmlattr>.max");
      if (!xmin || !xmax || ys.size() < 2) {
        unsupported(path + "/gf", "gf without xscale or xpts");
        return std::nullopt;
      }
      double step = (*xmax - *xmin) / (ys.size() - 1);
      for (std::size_t i = 0; i < ys.size(); ++i) xs.push_back(*xmin + i * step);
    }
    if (xs.size() != ys.size() || xs.size() < 2) {
      error(path + "/gf", "matching xpts/ypts with >= 2 points",
            std::to_string(xs.size()) + "/" + std::to_string(ys.size()));
      return std::nullopt;
    }
    Table t;
    t.name = name + "_gf";
    t.policy = OutOfRange::Clamp;  // graphical functions clamp at the ends
    for (std::size_t i = 0; i < xs.size(); ++i) t.points.emplace_back(xs[i], ys[i]);
    return t;
  }

  void import_stock(const pt::ptree& node, const std::string& path,
                    std::vector<std::pair<Stock, std::vector<std::string>>>&
                        pending_stocks) {
    auto name = name_attr(node, path);
    if (!name || !declare(*name, path)) return;
    if (node.get_child_optional("conveyor") ||
        node.get_child_optional("queue")) {
      unsupported(path, "conveyor/queue stock");
      return;
    }
    Stock s;
    s.name = *name;
    auto eqn = node.get_optional<std::string>("eqn");
    if (!eqn) {
      error(path, "an <eqn> initial value", "none");
      return;
    }
    s.initial = parse_eqn(*eqn, path);
    if (!s.initial) return;

    std::vector<std::string> in_names, out_names;
    for (const auto& [tag, child] : node) {
      if (tag == "inflow") in_names.push_back(normalize_name(child.data()));
      if (tag == "outflow") out_names.push_back(normalize_name(child.data()));
    }
    auto sum_of = [](const std::vector<std::string>& names) -> ExprPtr {
      ExprPtr acc;
      for (const auto& n : names) {
        ExprPtr v = make_var(n);
        acc = acc ? make_binary(BinaryOp::Add, acc, v) : v;
      }
      return acc;
    };
    s.inflow = sum_of(in_names);
    s.outflow = sum_of(out_names);
    std::vector<std::string> flow_refs = in_names;
    flow_refs.insert(flow_refs.end(), out_names.begin(), out_names.end());
    pending_stocks.push_back({std::move(s), std::move(flow_refs)});
  }

  void import_flow_or_aux(const pt::ptree& node, const std::string& path,
                          bool is_flow) {
    auto name = name_attr(node, path);
    if (!name || !declare(*name, path)) return;
    auto eqn = node.get_optional<std::string>("eqn");
    if (!eqn) {
      error(path, "an <eqn> element", "none");
      return;
    }
    ExprPtr expr = parse_eqn(*eqn, path);
    if (!expr) return;

    auto gf = node.get_child_optional("gf");
    if (gf) {
      auto table = parse_gf(*gf, *name, path);
      if (!table) return;
      std::string table_name = table->name;
      if (!declare(table_name, path + "/gf")) return;
      model.tables.push_back(std::move(*table));
      model.auxes.push_back({*name, make_lookup(table_name, expr)});
      return;
    }
    if (!is_flow) {
      if (auto value = as_constant(expr)) {
        model.exos.push_back({*name, *value});
        return;
      }
    }
    model.auxes.push_back({*name, std::move(expr)});
  }

  void run(const std::string& xml_text) {
    pt::ptree tree;
    try {
      std::istringstream in(xml_text);
      pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
      error("xmile", "well-formed XML", e.message());
      return;
    }
    auto xmile = tree.get_child_optional("xmile");
    if (!xmile) {
      error("/", "an <xmile> root element", "none");
      return;
    }
    if (xmile->get_child_optional("dimensions")) {
      unsupported("xmile/dimensions", "dimensions");
      return;
    }
    if (xmile->get_child_optional("macro")) {
      unsupported("xmile/macro", "macro");
      return;
    }
    model.name =
        normalize_name(xmile->get<std::string>("header.name", "imported"));
    if (!is_identifier(model.name)) model.name = "imported";

    auto model_node = xmile->get_child_optional("model");
    if (!model_node) {
      error("xmile", "a <model> element", "none");
      return;
    }
    auto vars = model_node->get_child_optional("variables");
    if (!vars) {
      error("xmile/model", "a <variables> element", "none");
      return;
    }

    std::vector<std::pair<Stock, std::vector<std::string>>> pending_stocks;
    for (const auto& [tag, child] : *vars) {
      std::string path = "xmile/model/variables/" + tag;
      if (tag == "stock") {
        import_stock(child, path, pending_stocks);
      } else if (tag == "flow") {
        import_flow_or_aux(child, path, true);
      } else if (tag == "aux") {
        import_flow_or_aux(child, path, false);
      } else if (tag == "<xmlattr>" || tag == "<xmlcomment>") {
        continue;
      } else if (tag == "module" || tag == "group" || tag == "array" ||
                 tag == "event") {
        unsupported(path, tag);
      } else {
        unsupported(path, tag);
      }
    }

    for (auto& [stock, flow_refs] : pending_stocks) {
      for (const auto& f : flow_refs) {
        if (!model.find_aux(f)) {
          error("xmile/model/variables/stock[" + stock.name + "]",
                "a <flow> named '" + f + "'", "none");
        }
      }
      model.stocks.push_back(std::move(stock));
    }

    if (!result.errors.empty()) return;
    auto diags = validate(model);
    for (const auto& d : diags) {
      if (d.severity == Severity::Warning) {
        result.warnings.push_back(d);
      } else {
        error("xmile/model", "a valid model (" +
                                 std::string(diag_code_name(d.code)) + ")",
              d.message);
      }
    }
    if (result.errors.empty()) {
      result.model = std::move(model);
    } else {
      result.warnings.clear();
    }
  }
};

}  // namespace

ParseResult import_xmile(const std::string& xml_text) {
  Importer importer;
  importer.run(xml_text);
  return importer.result;
}

}  // namespace sca
