#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "json.hpp"
#include "seqbayes/model.hpp"

namespace seqbayes {

/// Library version string.
std::string code_version();

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

/// CSV with header "index,value"; index is 1-based.
void write_sequence_csv(std::ostream& out, std::span<const double> values);
Sequence read_sequence_csv(std::istream& in);

/// Everything needed to regenerate one synthetic problem.
struct ProblemDescriptor {
  double alpha = 1.0;
  double tau = 1.0;
  double p = 1.0;
  KappaKind kappa_kind = KappaKind::ExactPolynomial;
  std::size_t trunc = 1000;
  double beta = 1.0;
  double n = 1000.0;
  std::uint64_t seed = 0;

  bool operator==(const ProblemDescriptor&) const = default;
};

nlohmann::json to_json(const ProblemDescriptor& d);
ProblemDescriptor problem_descriptor_from_json(const nlohmann::json& j);

}  // namespace seqbayes
