#pragma once

#include "qopt/errors.hpp"
#include "qopt/market.hpp"
#include "qopt/verifier.hpp"

#include <string>

namespace qopt {

/// Market description format: line-oriented key/value, `#` comments.
///
///   format qopt-market
///   version 1
///   horizon 1
///   assets 1
///   node 0 parent -1 prices 1
///   node 1 parent 0 prices 2
///   node 2 parent 0 prices 0.5
///   state 1 prob 0.5
///   state 2 prob 0.5
///
/// Node ids are dense and parents precede children. Every leaf takes exactly
/// one state line. Floats are written with 17 significant digits, so
/// serialize/parse round-trips are lossless.
ScenarioMarket parse_market(const std::string& text, const std::string& filename = "<string>");
ScenarioMarket load_market(const std::string& path);
std::string serialize_market(const ScenarioMarket& market);

/// Candidate measure format:
///
///   format qopt-candidate
///   version 1
///   q 2
///   values 0.9 1.2 0.95
///
/// `values` lists g* per state, in state order.
CandidateMeasure parse_candidate(const std::string& text, const std::string& filename = "<string>");
CandidateMeasure load_candidate(const std::string& path);
std::string serialize_candidate(const CandidateMeasure& candidate);

/// 17-significant-digit float formatting used by all writers.
std::string fmt17(double x);

} // namespace qopt
