#pragma once

#include <string>
#include <string_view>

namespace cablecal {

enum class Arch { linear, ff, rnn };
/// cmd: current command plus prior commands. est: current command plus prior
/// physical estimates.
enum class InputFormat { cmd, est };
/// abs: predict the target directly. delta: predict the correction added to
/// the current input value.
enum class OutputFormat { abs, delta };
/// forward: command -> physical. inverse: physical -> command.
enum class Direction { forward, inverse };
/// Joints that enter windows and targets: the three wrist joints or all six.
enum class JointSet { wrist, all };

std::string_view to_string(Arch v);
std::string_view to_string(InputFormat v);
std::string_view to_string(OutputFormat v);
std::string_view to_string(Direction v);
std::string_view to_string(JointSet v);

Arch parse_arch(std::string_view s);
InputFormat parse_input_format(std::string_view s);
OutputFormat parse_output_format(std::string_view s);
Direction parse_direction(std::string_view s);
JointSet parse_joint_set(std::string_view s);

inline int joint_count(JointSet j) { return j == JointSet::wrist ? 3 : 6; }
inline int first_joint(JointSet j) { return j == JointSet::wrist ? 3 : 0; }

}  // namespace cablecal
