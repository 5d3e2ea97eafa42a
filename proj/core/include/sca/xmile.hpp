#pragma once

#include <string>

#include "sca/parser.hpp"

namespace sca {

// Best-effort import of an XMILE subset: <stock> (inflow/outflow names
// resolved through <flow> equations), <flow> and <aux> as auxiliaries,
// numeric-constant <aux> as exogenous, continuous <gf> as tables.
// Everything outside the subset yields a ParseError naming the element path.
ParseResult import_xmile(const std::string& xml_text);

}  // namespace sca
