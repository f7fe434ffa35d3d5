#include "cablecal/formats.hpp"

#include <string>

#include "cablecal/error.hpp"

namespace cablecal {

std::string_view to_string(Arch v) {
  switch (v) {
    case Arch::linear: return "linear";
    case Arch::ff: return "ff";
    case Arch::rnn: return "rnn";
  }
  return "?";
}
std::string_view to_string(InputFormat v) { return v == InputFormat::cmd ? "cmd" : "est"; }
std::string_view to_string(OutputFormat v) { return v == OutputFormat::abs ? "abs" : "delta"; }
std::string_view to_string(Direction v) { return v == Direction::forward ? "forward" : "inverse"; }
std::string_view to_string(JointSet v) { return v == JointSet::wrist ? "wrist" : "all"; }

namespace {
[[noreturn]] void bad(std::string_view what, std::string_view s) {
  throw Error(Errc::invalid_argument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}
}  // namespace

Arch parse_arch(std::string_view s) {
  if (s == "linear") return Arch::linear;
  if (s == "ff") return Arch::ff;
  if (s == "rnn") return Arch::rnn;
  bad("architecture", s);
}
InputFormat parse_input_format(std::string_view s) {
  if (s == "cmd") return InputFormat::cmd;
  if (s == "est") return InputFormat::est;
  bad("input format", s);
}
OutputFormat parse_output_format(std::string_view s) {
  if (s == "abs") return OutputFormat::abs;
  if (s == "delta") return OutputFormat::delta;
  bad("output format", s);
}
Direction parse_direction(std::string_view s) {
  if (s == "forward") return Direction::forward;
  if (s == "inverse") return Direction::inverse;
  bad("direction", s);
}
JointSet parse_joint_set(std::string_view s) {
  if (s == "wrist") return JointSet::wrist;
  if (s == "all") return JointSet::all;
  bad("joint set", s);
}

}  // namespace cablecal
