#include "seqbayes/io.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

namespace seqbayes {

std::string code_version() { return SEQBAYES_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

void write_sequence_csv(std::ostream& out, std::span<const double> values) {
  out << "index,value\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    out << (k + 1) << ',' << format_double(values[k]) << '\n';
  }
}

Sequence read_sequence_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "index,value") {
    throw std::runtime_error("read_sequence_csv: missing 'index,value' header");
  }
  Sequence out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("read_sequence_csv: malformed row");
    std::size_t index = 0;
    double value = 0.0;
    const char* first = line.data();
    auto r1 = std::from_chars(first, first + comma, index);
    auto r2 = std::from_chars(first + comma + 1, first + line.size(), value);
    if (r1.ec != std::errc() || r2.ec != std::errc() || index != out.size() + 1) {
      throw std::runtime_error("read_sequence_csv: malformed row '" + line + "'");
    }
    out.push_back(value);
  }
  return out;
}

nlohmann::json to_json(const ProblemDescriptor& d) {
  return nlohmann::json{{"alpha", d.alpha}, {"tau", d.tau},
                        {"p", d.p},         {"kappa_kind", to_string(d.kappa_kind)},
                        {"trunc", d.trunc}, {"beta", d.beta},
                        {"n", d.n},         {"seed", d.seed}};
}

ProblemDescriptor problem_descriptor_from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys{"alpha", "tau", "p",    "kappa_kind",
                                          "trunc", "beta", "n", "seed"};
  if (!j.is_object()) throw std::invalid_argument("problem descriptor must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!keys.contains(key)) throw std::invalid_argument("unknown descriptor key '" + key + "'");
  }
  ProblemDescriptor d;
  d.alpha = j.value("alpha", d.alpha);
  d.tau = j.value("tau", d.tau);
  d.p = j.value("p", d.p);
  if (j.contains("kappa_kind")) d.kappa_kind = kappa_kind_from_string(j.at("kappa_kind"));
  d.trunc = j.value("trunc", d.trunc);
  d.beta = j.value("beta", d.beta);
  d.n = j.value("n", d.n);
  d.seed = j.value("seed", d.seed);
  return d;
}

}  // namespace seqbayes
